#pragma once

#include "analysis.hpp"
#include "checkpoint.hpp"
#include "compress.hpp"
#include "error.hpp"
#include "kmeans.hpp"
#include "matrix.hpp"
#include "norms.hpp"
#include "npy.hpp"
#include "projection.hpp"
#include "toynet.hpp"
