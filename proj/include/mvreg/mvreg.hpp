#pragma once

// Umbrella header for the multi-view registration toolkit.

#include "mvreg/error.hpp"
#include "mvreg/io.hpp"
#include "mvreg/kdtree.hpp"
#include "mvreg/motion_graph.hpp"
#include "mvreg/pairwise.hpp"
#include "mvreg/pipeline.hpp"
#include "mvreg/point_cloud.hpp"
#include "mvreg/recovery.hpp"
#include "mvreg/rng.hpp"
#include "mvreg/se3.hpp"
#include "mvreg/synth.hpp"
#include "mvreg/wlrs.hpp"
