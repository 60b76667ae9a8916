#pragma once

// Convenience include for the whole library.

#include "distillkit/analysis.hpp"
#include "distillkit/datasets.hpp"
#include "distillkit/distillation.hpp"
#include "distillkit/errors.hpp"
#include "distillkit/kernels.hpp"
#include "distillkit/regression.hpp"
#include "distillkit/serialize.hpp"
#include "distillkit/spectral.hpp"
