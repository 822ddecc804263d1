#pragma once

// Umbrella header for the cumulative foot pressure recognition library.

#include "cfp/bundle.hpp"
#include "cfp/coding.hpp"
#include "cfp/config.hpp"
#include "cfp/descriptors.hpp"
#include "cfp/dictionary_learning.hpp"
#include "cfp/discriminative.hpp"
#include "cfp/errors.hpp"
#include "cfp/evaluation.hpp"
#include "cfp/kmeans.hpp"
#include "cfp/matrix_io.hpp"
#include "cfp/pressure_image.hpp"
#include "cfp/protocol.hpp"
#include "cfp/random.hpp"
#include "cfp/representation.hpp"
#include "cfp/synthetic.hpp"
