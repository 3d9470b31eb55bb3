// hmlab.hpp — umbrella include.
#pragma once

#include "hmlab/core.hpp"
#include "hmlab/datagen.hpp"
#include "hmlab/harness.hpp"
#include "hmlab/kernels.hpp"
#include "hmlab/model.hpp"
#include "hmlab/numerics.hpp"
#include "hmlab/parallel.hpp"
#include "hmlab/readout.hpp"
#include "hmlab/rng.hpp"
#include "hmlab/spectral.hpp"
#include "hmlab/theory.hpp"
