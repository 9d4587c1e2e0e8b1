#pragma once

// Umbrella header: the whole library in dependency order.

#include "magvel/errors.hpp"
#include "magvel/rational.hpp"
#include "magvel/lattice.hpp"
#include "magvel/fields.hpp"
#include "magvel/arithmetic.hpp"
#include "magvel/forward.hpp"
#include "magvel/inverse.hpp"
#include "magvel/transport.hpp"
#include "magvel/field_file.hpp"
#include "magvel/cli.hpp"
