#pragma once

// Umbrella header for the whole pipeline.

#include "binpick/camera.hpp"
#include "binpick/common.hpp"
#include "binpick/detect.hpp"
#include "binpick/eval.hpp"
#include "binpick/mesh.hpp"
#include "binpick/mesh_io.hpp"
#include "binpick/model_io.hpp"
#include "binpick/parallel.hpp"
#include "binpick/point_cloud.hpp"
#include "binpick/pose.hpp"
#include "binpick/ppf.hpp"
#include "binpick/render.hpp"
#include "binpick/report_io.hpp"
#include "binpick/rng.hpp"
#include "binpick/scene_io.hpp"
#include "binpick/synth.hpp"
