// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "favoa/errors.hpp"
#include "favoa/tensor.hpp"
#include "favoa/gradcheck.hpp"
#include "favoa/layers.hpp"
#include "favoa/gbu.hpp"
#include "favoa/context.hpp"
#include "favoa/metrics.hpp"
#include "favoa/dataset.hpp"
#include "favoa/provider.hpp"
#include "favoa/model.hpp"
#include "favoa/serialize.hpp"
#include "favoa/train.hpp"
#include "favoa/contribution.hpp"
#include "favoa/synth.hpp"
