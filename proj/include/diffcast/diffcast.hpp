#pragma once

#include "core.hpp"
#include "data.hpp"
#include "diffusion.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "nn.hpp"
#include "simplex.hpp"
#include "value.hpp"
