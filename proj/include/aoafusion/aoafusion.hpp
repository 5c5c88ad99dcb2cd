#pragma once

#include "aoafusion/angle.hpp"
#include "aoafusion/array.hpp"
#include "aoafusion/common.hpp"
#include "aoafusion/crb.hpp"
#include "aoafusion/estimate.hpp"
#include "aoafusion/fml.hpp"
#include "aoafusion/fused.hpp"
#include "aoafusion/grid.hpp"
#include "aoafusion/harness.hpp"
#include "aoafusion/music.hpp"
#include "aoafusion/rng.hpp"
#include "aoafusion/scene.hpp"
