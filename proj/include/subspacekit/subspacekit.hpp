#pragma once

// Umbrella header.

#include "subspacekit/error.hpp"
#include "subspacekit/evaldata/matrix_io.hpp"
#include "subspacekit/evaldata/metrics.hpp"
#include "subspacekit/evaldata/pgm.hpp"
#include "subspacekit/evaldata/synthetic.hpp"
#include "subspacekit/neuralnet/adam.hpp"
#include "subspacekit/neuralnet/checkpoint.hpp"
#include "subspacekit/neuralnet/engine.hpp"
#include "subspacekit/neuralnet/gradcheck.hpp"
#include "subspacekit/neuralnet/losses.hpp"
#include "subspacekit/neuralnet/network_spec.hpp"
#include "subspacekit/neuralnet/params.hpp"
#include "subspacekit/neuralnet/presets.hpp"
#include "subspacekit/neuralnet/tensor.hpp"
#include "subspacekit/numkernel/kmeans.hpp"
#include "subspacekit/numkernel/linalg.hpp"
#include "subspacekit/numkernel/matrix.hpp"
#include "subspacekit/numkernel/parallel.hpp"
#include "subspacekit/numkernel/random.hpp"
#include "subspacekit/pipeline/trainers.hpp"
#include "subspacekit/selfexpress/closed_form.hpp"
#include "subspacekit/spectral/spectral.hpp"
