#pragma once

#include "lqspec/closed_forms.hpp"
#include "lqspec/empirical.hpp"
#include "lqspec/errors.hpp"
#include "lqspec/gifs_model.hpp"
#include "lqspec/matrix_spec.hpp"
#include "lqspec/parallel.hpp"
#include "lqspec/scc.hpp"
#include "lqspec/solver.hpp"
#include "lqspec/spectral.hpp"
