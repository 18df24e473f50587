#pragma once

// Umbrella header: the whole library, including file I/O and the embedded
// verification suite.

#include "mtgp/common.hpp"
#include "mtgp/linalg.hpp"
#include "mtgp/kernel.hpp"
#include "mtgp/coregionalization.hpp"
#include "mtgp/dataset.hpp"
#include "mtgp/gp.hpp"
#include "mtgp/multitask.hpp"
#include "mtgp/parameters.hpp"
#include "mtgp/optim.hpp"
#include "mtgp/training.hpp"
#include "mtgp/forrester.hpp"
#include "mtgp/benchmark.hpp"
#include "mtgp/selfcheck.hpp"
#include "mtgp/io/csv.hpp"
#include "mtgp/io/config.hpp"
#include "mtgp/io/model_file.hpp"
#include "mtgp/io/study_output.hpp"
