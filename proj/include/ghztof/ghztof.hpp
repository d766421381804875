// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ghztof/common.hpp"
#include "ghztof/correlation.hpp"
#include "ghztof/jones.hpp"
#include "ghztof/metrics.hpp"
#include "ghztof/parallel.hpp"
#include "ghztof/pipeline.hpp"
#include "ghztof/scene.hpp"
#include "ghztof/tofb.hpp"
#include "ghztof/unwrap_classical.hpp"
#include "ghztof/unwrap_neural.hpp"
