#pragma once

#include "sdnn/dataio.hpp"
#include "sdnn/engine.hpp"
#include "sdnn/kernels.hpp"
#include "sdnn/perfmodel.hpp"
#include "sdnn/radixnet.hpp"
#include "sdnn/run_config.hpp"
#include "sdnn/sparse_matrix.hpp"
