#pragma once

#include "data.hpp"
#include "detector.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "linalg.hpp"
#include "lstm.hpp"
#include "model.hpp"
#include "model_io.hpp"
#include "pipeline.hpp"
#include "reference_forward.hpp"
#include "rng.hpp"
#include "trainer.hpp"
