// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace fusionforge {

/// ASR transcripts of the noisy original and of the two separated channels.
struct TranscriptTriple {
  std::string text_temp;
  std::string text_id0;
  std::string text_id1;
};

enum class AudioChoice { kSeparated0, kSeparated1, kOriginal };

std::string_view to_string(AudioChoice choice);

struct SelectionDecision {
  AudioChoice choice = AudioChoice::kOriginal;
  double sim0 = 0.0;
  double sim1 = 0.0;
};

inline constexpr double kDefaultSelectionThreshold = 0.1;

/// Decodes UTF-8 into Unicode scalar values; malformed bytes become U+FFFD.
std::u32string decode_utf8(std::string_view text);

/// Levenshtein distance with unit insert/delete/substitute costs.
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);

/// 1 − edit_distance / max(|a|, |b|) over scalar values; 1 for two empty
/// strings.
double similarity(std::string_view a, std::string_view b);

/// NFC normalization, whitespace runs collapsed to one space, trimmed.
std::string normalize_transcript(std::string_view text);

/// Picks the channel with the higher similarity when the two differ by
/// strictly more than `threshold`, else the original audio. Differences
/// within a few ulps of the threshold count as equal to it. Throws
/// DomainError for similarities outside [0, 1] or a negative/NaN threshold.
SelectionDecision select_audio(double sim0, double sim1,
                               double threshold = kDefaultSelectionThreshold);

/// Scores each separated transcript against text_temp, then select_audio.
SelectionDecision denoise_decide(const TranscriptTriple& triple,
                                 double threshold = kDefaultSelectionThreshold,
                                 bool normalize = false);

}  // namespace fusionforge
