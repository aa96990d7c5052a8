#pragma once

#include "clustering.hpp"
#include "curve_fit.hpp"
#include "dtw.hpp"
#include "io.hpp"
#include "knn.hpp"
#include "labels.hpp"
#include "parallel.hpp"
#include "plot.hpp"
#include "series.hpp"
#include "synth.hpp"
#include "validation.hpp"

namespace popshape {

inline constexpr const char* kVersion = "0.1.0";

} // namespace popshape
