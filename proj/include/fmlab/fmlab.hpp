#pragma once

#include "fmlab/error.hpp"
#include "fmlab/fft.hpp"
#include "fmlab/grid.hpp"
#include "fmlab/io.hpp"
#include "fmlab/special.hpp"
#include "fmlab/semigroup.hpp"
#include "fmlab/fracint.hpp"
#include "fmlab/norms.hpp"
#include "fmlab/corpus.hpp"
#include "fmlab/harness.hpp"
