#pragma once

#include "baselines.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "embeddings.hpp"
#include "error.hpp"
#include "index.hpp"
#include "metrics.hpp"
#include "neural.hpp"
#include "oracle.hpp"
#include "prf.hpp"
#include "rl.hpp"
#include "supervised.hpp"
#include "synthetic.hpp"
#include "tensor.hpp"
