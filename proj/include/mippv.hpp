#pragma once

#include "mippv/errors.hpp"
#include "mippv/pv_model.hpp"
#include "mippv/converter.hpp"
#include "mippv/control.hpp"
#include "mippv/integrator.hpp"
#include "mippv/mission_profile.hpp"
#include "mippv/scenario.hpp"
#include "mippv/engine.hpp"
#include "mippv/scenario_io.hpp"
#include "mippv/waveform_io.hpp"
#include "mippv/report.hpp"
#include "mippv/cli.hpp"
