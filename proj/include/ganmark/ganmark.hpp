#pragma once

// Umbrella header for the GAN watermarking toolkit.

#include "ganmark/augment.hpp"
#include "ganmark/bitstring.hpp"
#include "ganmark/checkpoint.hpp"
#include "ganmark/codec.hpp"
#include "ganmark/config.hpp"
#include "ganmark/dataset.hpp"
#include "ganmark/embed.hpp"
#include "ganmark/gan.hpp"
#include "ganmark/image_io.hpp"
#include "ganmark/losses.hpp"
#include "ganmark/manifest.hpp"
#include "ganmark/metrics.hpp"
#include "ganmark/nn.hpp"
#include "ganmark/rng.hpp"
#include "ganmark/sweep.hpp"
#include "ganmark/tensor.hpp"
#include "ganmark/verify.hpp"
