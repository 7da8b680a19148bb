// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusionforge/denoise.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fusionforge/error.hpp"

namespace fusionforge {

std::string_view to_string(AudioChoice choice) {
  switch (choice) {
    case AudioChoice::kSeparated0: return "separated0";
    case AudioChoice::kSeparated1: return "separated1";
    case AudioChoice::kOriginal: return "original";
  }
  return "?";
}

std::u32string decode_utf8(std::string_view text) {
  constexpr char32_t kReplacement = 0xFFFD;
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2, cp = b0 & 0x1F, min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3, cp = b0 & 0x0F, min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4, cp = b0 & 0x07, min = 0x10000;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    std::size_t j = 1;
    for (; j < len && i + j < text.size(); ++j) {
      const auto b = static_cast<unsigned char>(text[i + j]);
      if ((b & 0xC0) != 0x80) break;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (j != len || cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      out.push_back(kReplacement);
      i += j;  // resynchronize on the first byte that broke the sequence
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double similarity(std::string_view a, std::string_view b) {
  const std::u32string ua = decode_utf8(a);
  const std::u32string ub = decode_utf8(b);
  const std::size_t longest = std::max(ua.size(), ub.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(ua, ub)) / static_cast<double>(longest);
}

std::string normalize_transcript(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("normalize: ICU NFC normalizer unavailable");
  const icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<std::int32_t>(text.size())));
  const icu::UnicodeString normalized = nfc->normalize(src, status);
  if (U_FAILURE(status)) throw Error("normalize: NFC normalization failed");

  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (std::int32_t i = 0; i < normalized.length();) {
    const UChar32 c = normalized.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = !collapsed.isEmpty();
      continue;
    }
    if (pending_space) collapsed.append(static_cast<UChar>(' '));
    pending_space = false;
    collapsed.append(c);
  }
  std::string out;
  collapsed.toUTF8String(out);
  return out;
}

SelectionDecision select_audio(double sim0, double sim1, double threshold) {
  auto in_unit = [](double s) { return s >= 0.0 && s <= 1.0; };
  if (!in_unit(sim0) || !in_unit(sim1)) {
    throw DomainError("select_audio: similarities must lie in [0, 1]");
  }
  if (!(threshold >= 0.0)) throw DomainError("select_audio: threshold must be >= 0");

  SelectionDecision d{AudioChoice::kOriginal, sim0, sim1};
  const double gap = std::abs(sim0 - sim1);
  // "Exceeds" is strict; a gap that equals the threshold up to rounding
  // (e.g. 0.4 - 0.3) is treated as equal.
  if (gap > threshold && gap - threshold > 1e-12 * threshold) {
    d.choice = sim0 > sim1 ? AudioChoice::kSeparated0 : AudioChoice::kSeparated1;
  }
  return d;
}

SelectionDecision denoise_decide(const TranscriptTriple& triple, double threshold,
                                 bool normalize) {
  if (normalize) {
    const std::string temp = normalize_transcript(triple.text_temp);
    return select_audio(similarity(normalize_transcript(triple.text_id0), temp),
                        similarity(normalize_transcript(triple.text_id1), temp), threshold);
  }
  return select_audio(similarity(triple.text_id0, triple.text_temp),
                      similarity(triple.text_id1, triple.text_temp), threshold);
}

}  // namespace fusionforge
