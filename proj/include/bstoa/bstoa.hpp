// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "bstoa/analysis.hpp"
#include "bstoa/channel.hpp"
#include "bstoa/common.hpp"
#include "bstoa/csv.hpp"
#include "bstoa/estimator.hpp"
#include "bstoa/harness.hpp"
#include "bstoa/localization.hpp"
#include "bstoa/parallel.hpp"
#include "bstoa/rng.hpp"
#include "bstoa/topology.hpp"
