#ifndef WGCS_WGCS_HPP
#define WGCS_WGCS_HPP

#include "autodiff.hpp"
#include "baseline.hpp"
#include "bench.hpp"
#include "cli.hpp"
#include "data.hpp"
#include "error.hpp"
#include "json_util.hpp"
#include "metrics.hpp"
#include "nn.hpp"
#include "optim.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "sampler.hpp"
#include "synth.hpp"
#include "wgan.hpp"

#endif  // WGCS_WGCS_HPP
