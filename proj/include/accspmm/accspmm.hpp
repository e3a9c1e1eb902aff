#pragma once

#include <accspmm/core.hpp>
#include <accspmm/reorder.hpp>
#include <accspmm/tile.hpp>
#include <accspmm/bittcf.hpp>
#include <accspmm/balance.hpp>
#include <accspmm/executor.hpp>
#include <accspmm/pipesim.hpp>
#include <accspmm/json.hpp>
