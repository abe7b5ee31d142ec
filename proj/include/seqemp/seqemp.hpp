#pragma once

#include "seqemp/applications.hpp"
#include "seqemp/empirical.hpp"
#include "seqemp/error.hpp"
#include "seqemp/generators.hpp"
#include "seqemp/limit.hpp"
#include "seqemp/ottaviani.hpp"
#include "seqemp/parallel.hpp"
#include "seqemp/rng.hpp"
#include "seqemp/stats.hpp"
#include "seqemp/version.hpp"
