#pragma once

#include "nbeatstar/data/dataset_io.hpp"
#include "nbeatstar/data/sampler.hpp"
#include "nbeatstar/data/synthetic.hpp"
#include "nbeatstar/data/time_series.hpp"
#include "nbeatstar/data/windows.hpp"
#include "nbeatstar/ensemble/ensemble.hpp"
#include "nbeatstar/eval/baseline.hpp"
#include "nbeatstar/eval/diebold_mariano.hpp"
#include "nbeatstar/eval/metrics.hpp"
#include "nbeatstar/loss/loss.hpp"
#include "nbeatstar/model/checkpoint.hpp"
#include "nbeatstar/model/config.hpp"
#include "nbeatstar/model/nbeats_star.hpp"
#include "nbeatstar/nn/adam.hpp"
#include "nbeatstar/nn/grad_check.hpp"
#include "nbeatstar/nn/ops.hpp"
#include "nbeatstar/nn/tape.hpp"
#include "nbeatstar/nn/tensor.hpp"
#include "nbeatstar/train/pool.hpp"
#include "nbeatstar/train/trainer.hpp"
