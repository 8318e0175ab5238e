#pragma once

#include "psmet/costrate.hpp"
#include "psmet/error.hpp"
#include "psmet/fisher.hpp"
#include "psmet/kdq.hpp"
#include "psmet/postselect.hpp"
#include "psmet/protocols.hpp"
#include "psmet/qcore.hpp"
#include "psmet/theorems.hpp"
