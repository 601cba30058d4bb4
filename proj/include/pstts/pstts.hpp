#pragma once

// Umbrella header.

#include "pstts/audio.hpp"
#include "pstts/ctc.hpp"
#include "pstts/dtw.hpp"
#include "pstts/error.hpp"
#include "pstts/isochrony.hpp"
#include "pstts/json_io.hpp"
#include "pstts/pauses.hpp"
#include "pstts/pipeline.hpp"
#include "pstts/providers.hpp"
#include "pstts/selection.hpp"
#include "pstts/sequences.hpp"
#include "pstts/vowel_space.hpp"
