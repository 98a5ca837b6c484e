#pragma once

#include "diarkit/annotation.hpp"
#include "diarkit/beamform.hpp"
#include "diarkit/embedding.hpp"
#include "diarkit/fusion.hpp"
#include "diarkit/hungarian.hpp"
#include "diarkit/melbank.hpp"
#include "diarkit/nmesc.hpp"
#include "diarkit/osd.hpp"
#include "diarkit/overlap.hpp"
#include "diarkit/pipeline.hpp"
#include "diarkit/rng.hpp"
#include "diarkit/rttm.hpp"
#include "diarkit/scoring.hpp"
#include "diarkit/sim.hpp"
#include "diarkit/stft.hpp"
#include "diarkit/timeline.hpp"
#include "diarkit/wav.hpp"
#include "diarkit/wpe.hpp"
