// Umbrella header.
#pragma once

#include "jolt/config.hpp"
#include "jolt/dataset.hpp"
#include "jolt/error.hpp"
#include "jolt/gradcheck.hpp"
#include "jolt/harness.hpp"
#include "jolt/io.hpp"
#include "jolt/kmeans.hpp"
#include "jolt/labels.hpp"
#include "jolt/losses.hpp"
#include "jolt/network.hpp"
#include "jolt/noise.hpp"
#include "jolt/optimizer.hpp"
#include "jolt/rng.hpp"
#include "jolt/tensor.hpp"
#include "jolt/trainer.hpp"
