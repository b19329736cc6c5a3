#pragma once

#include "ltsar/distance.hpp"
#include "ltsar/embeddings.hpp"
#include "ltsar/ensemble.hpp"
#include "ltsar/error.hpp"
#include "ltsar/knn.hpp"
#include "ltsar/metrics.hpp"
#include "ltsar/parallel.hpp"
#include "ltsar/pipeline.hpp"
#include "ltsar/raster.hpp"
#include "ltsar/raster_io.hpp"
#include "ltsar/resize.hpp"
#include "ltsar/sampling.hpp"
#include "ltsar/speckle.hpp"
#include "ltsar/synthgen.hpp"
