#pragma once

#include "gfscma/rng.hpp"
#include "gfscma/scma.hpp"
#include "gfscma/airlink.hpp"
#include "gfscma/xcorr.hpp"
#include "gfscma/nn.hpp"
#include "gfscma/models.hpp"
#include "gfscma/harness.hpp"
