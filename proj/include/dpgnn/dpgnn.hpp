#pragma once

#include "dpgnn/checkpoint.hpp"
#include "dpgnn/config.hpp"
#include "dpgnn/corpus.hpp"
#include "dpgnn/dpgraph.hpp"
#include "dpgnn/eval.hpp"
#include "dpgnn/experiment.hpp"
#include "dpgnn/model.hpp"
#include "dpgnn/optim.hpp"
#include "dpgnn/trainer.hpp"
