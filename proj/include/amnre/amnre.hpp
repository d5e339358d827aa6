#pragma once

#include "amnre/adamw.hpp"
#include "amnre/binary_io.hpp"
#include "amnre/checkpoint.hpp"
#include "amnre/config.hpp"
#include "amnre/datastore.hpp"
#include "amnre/diagnostics.hpp"
#include "amnre/estimator.hpp"
#include "amnre/groundtruth.hpp"
#include "amnre/losses.hpp"
#include "amnre/masking.hpp"
#include "amnre/network.hpp"
#include "amnre/parallel.hpp"
#include "amnre/posterior.hpp"
#include "amnre/prior.hpp"
#include "amnre/rng.hpp"
#include "amnre/simulator.hpp"
#include "amnre/trainer.hpp"
