#pragma once

#include "gazecoach/agents.hpp"
#include "gazecoach/commands.hpp"
#include "gazecoach/complexity.hpp"
#include "gazecoach/config.hpp"
#include "gazecoach/error_type.hpp"
#include "gazecoach/errors.hpp"
#include "gazecoach/eval.hpp"
#include "gazecoach/executor.hpp"
#include "gazecoach/gateway.hpp"
#include "gazecoach/gaze.hpp"
#include "gazecoach/prompts.hpp"
#include "gazecoach/remote_backend.hpp"
#include "gazecoach/scripted_backend.hpp"
#include "gazecoach/synth.hpp"
#include "gazecoach/thought_graph.hpp"
