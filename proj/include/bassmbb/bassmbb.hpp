#pragma once

#include "bassmbb/bass_core.hpp"
#include "bassmbb/convex_order.hpp"
#include "bassmbb/duality.hpp"
#include "bassmbb/errors.hpp"
#include "bassmbb/geometry.hpp"
#include "bassmbb/io.hpp"
#include "bassmbb/legendre.hpp"
#include "bassmbb/martingale.hpp"
#include "bassmbb/measures.hpp"
#include "bassmbb/ot_core.hpp"
#include "bassmbb/parallel.hpp"
