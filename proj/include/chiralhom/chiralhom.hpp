#pragma once

#include "chiralhom/types.hpp"
#include "chiralhom/phase.hpp"
#include "chiralhom/microstructure.hpp"
#include "chiralhom/chi.hpp"
#include "chiralhom/magnetization.hpp"
#include "chiralhom/correctors.hpp"
#include "chiralhom/demag.hpp"
#include "chiralhom/energy.hpp"
#include "chiralhom/minimize.hpp"
#include "chiralhom/io.hpp"
#include "chiralhom/config.hpp"
#include "chiralhom/experiments.hpp"
