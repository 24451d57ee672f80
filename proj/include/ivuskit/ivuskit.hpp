#pragma once

#include "ivuskit/version.hpp"
#include "ivuskit/error.hpp"
#include "ivuskit/rng.hpp"
#include "ivuskit/grid.hpp"
#include "ivuskit/labeling.hpp"
#include "ivuskit/io/csv.hpp"
#include "ivuskit/io/png_io.hpp"
#include "ivuskit/data/manifest.hpp"
#include "ivuskit/data/loader.hpp"
#include "ivuskit/data/phantom.hpp"
#include "ivuskit/geometry/contour.hpp"
#include "ivuskit/geometry/measure.hpp"
#include "ivuskit/postproc/postproc.hpp"
#include "ivuskit/metrics/metrics.hpp"
#include "ivuskit/stats/stats.hpp"
#include "ivuskit/stats/plot.hpp"
#include "ivuskit/nn/tensor.hpp"
#include "ivuskit/nn/layers.hpp"
#include "ivuskit/nn/dice.hpp"
#include "ivuskit/model/config.hpp"
#include "ivuskit/model/network.hpp"
#include "ivuskit/model/checkpoint.hpp"
#include "ivuskit/train/config.hpp"
#include "ivuskit/train/split.hpp"
#include "ivuskit/train/optimizer.hpp"
#include "ivuskit/train/loss.hpp"
#include "ivuskit/train/trainer.hpp"
#include "ivuskit/train/predict.hpp"
