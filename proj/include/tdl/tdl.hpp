#pragma once

#include "tdl/code.hpp"
#include "tdl/syntax.hpp"
#include "tdl/normal_form.hpp"
#include "tdl/hierarchy.hpp"
#include "tdl/feature_structure.hpp"
#include "tdl/unify.hpp"
#include "tdl/expansion.hpp"
#include "tdl/session.hpp"
