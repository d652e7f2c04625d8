#pragma once

#include "pose_consensus/benchmark.hpp"
#include "pose_consensus/consensus.hpp"
#include "pose_consensus/counter_rng.hpp"
#include "pose_consensus/digest.hpp"
#include "pose_consensus/error.hpp"
#include "pose_consensus/estimator.hpp"
#include "pose_consensus/geometry.hpp"
#include "pose_consensus/json_io.hpp"
#include "pose_consensus/pipeline.hpp"
#include "pose_consensus/process_backend.hpp"
#include "pose_consensus/protocol.hpp"
#include "pose_consensus/records.hpp"
#include "pose_consensus/report.hpp"
#include "pose_consensus/sampling.hpp"
#include "pose_consensus/synthetic.hpp"
