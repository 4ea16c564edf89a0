//
// Copyright 2026 The invrat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Toxic-class F1, per-attribute false positive rates, checkpoint selection,
// rationale dumps and the multi-run results table.

#ifndef INVRAT_EVAL_HPP_
#define INVRAT_EVAL_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "invrat/corpus.hpp"
#include "invrat/error.hpp"
#include "invrat/players.hpp"
#include "json.hpp"

namespace invrat {

enum class EvalAttribute : std::uint8_t { kNoi = 0, kOi = 1, kOni = 2, kAae = 3 };
inline constexpr std::array<EvalAttribute, 4> kEvalAttributes = {
    EvalAttribute::kNoi, EvalAttribute::kOi, EvalAttribute::kOni, EvalAttribute::kAae};

inline const char* eval_attribute_name(EvalAttribute a) {
  switch (a) {
    case EvalAttribute::kNoi: return "nOI";
    case EvalAttribute::kOi: return "OI";
    case EvalAttribute::kOni: return "OnI";
    case EvalAttribute::kAae: return "AAE";
  }
  return "?";
}

inline std::optional<EvalAttribute> parse_eval_attribute(std::string_view s) {
  const std::string v = ascii_lower(s);
  if (v == "noi") return EvalAttribute::kNoi;
  if (v == "oi") return EvalAttribute::kOi;
  if (v == "oni") return EvalAttribute::kOni;
  if (v == "aae") return EvalAttribute::kAae;
  return std::nullopt;
}

inline bool has_attribute(const Document& doc, EvalAttribute a) {
  switch (a) {
    case EvalAttribute::kNoi: return doc.attributes.contains(Attribute::kNoi);
    case EvalAttribute::kOi: return doc.attributes.contains(Attribute::kOi);
    case EvalAttribute::kOni: return doc.attributes.contains(Attribute::kOni);
    case EvalAttribute::kAae: return doc.dialect == Dialect::kAae;
  }
  return false;
}

struct Confusion {
  long long tp = 0;
  long long fp = 0;
  long long tn = 0;
  long long fn = 0;

  long long total() const { return tp + fp + tn + fn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

inline void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorKind::kInvalidArgument,
                "predictions and golds differ in length (" + std::to_string(a) +
                    " vs " + std::to_string(b) + ")");
  }
}

inline Confusion confusion(std::span<const int> predictions, std::span<const int> golds) {
  check_lengths(predictions.size(), golds.size());
  Confusion c;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const bool p = predictions[i] == 1;
    const bool g = golds[i] == 1;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

// F1 of the toxic class; 0 when precision + recall is 0.
inline double f1_from(const Confusion& c) {
  const double denom = 2.0 * c.tp + c.fp + c.fn;
  return c.tp == 0 ? 0.0 : 2.0 * c.tp / denom;
}

inline double f1(std::span<const int> predictions, std::span<const int> golds) {
  check_lengths(predictions.size(), golds.size());
  if (golds.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "f1 of an empty set");
  }
  return f1_from(confusion(predictions, golds));
}

// Undefined (nullopt) when the subset has no gold-negative documents.
inline std::optional<double> fpr_from(const Confusion& c) {
  if (c.fp + c.tn == 0) return std::nullopt;
  return static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
}

inline Confusion subset_confusion(std::span<const int> predictions,
                                  std::span<const int> golds,
                                  std::span<const Document> docs, EvalAttribute a) {
  check_lengths(predictions.size(), golds.size());
  check_lengths(docs.size(), golds.size());
  std::vector<int> p, g;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!has_attribute(docs[i], a)) continue;
    p.push_back(predictions[i]);
    g.push_back(golds[i]);
  }
  return confusion(p, g);
}

inline std::optional<double> fpr_by_attribute(std::span<const int> predictions,
                                              std::span<const int> golds,
                                              std::span<const Document> docs,
                                              EvalAttribute a) {
  return fpr_from(subset_confusion(predictions, golds, docs, a));
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct AttributeMetrics {
  EvalAttribute attribute = EvalAttribute::kNoi;
  long long support = 0;
  long long negatives = 0;
  std::optional<double> f1;
  std::optional<double> fpr;
};

struct MetricsReport {
  double f1 = 0.0;
  Confusion confusion;
  std::array<AttributeMetrics, 4> attributes;
  std::uint64_t seed = 0;
  int checkpoint = 0;
  bool selection_fallback = false;
  std::map<std::string, double> diagnostics;

  const AttributeMetrics& at(EvalAttribute a) const {
    return attributes[static_cast<std::size_t>(a)];
  }

  // Mean of the defined per-attribute FPRs, or one attribute's FPR.
  std::optional<double> target_fpr(std::optional<EvalAttribute> target) const {
    if (target) return at(*target).fpr;
    double sum = 0.0;
    int n = 0;
    for (const auto& m : attributes) {
      if (!m.fpr) continue;
      sum += *m.fpr;
      ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / n;
  }
};

inline MetricsReport compute_report(std::span<const int> predictions,
                                    std::span<const int> golds,
                                    std::span<const Document> docs,
                                    std::uint64_t seed = 0, int checkpoint = 0) {
  MetricsReport r;
  r.f1 = f1(predictions, golds);
  r.confusion = confusion(predictions, golds);
  r.seed = seed;
  r.checkpoint = checkpoint;
  for (EvalAttribute a : kEvalAttributes) {
    auto& m = r.attributes[static_cast<std::size_t>(a)];
    m.attribute = a;
    const Confusion c = subset_confusion(predictions, golds, docs, a);
    m.support = c.total();
    m.negatives = c.fp + c.tn;
    if (m.support > 0) m.f1 = f1_from(c);
    m.fpr = fpr_from(c);
  }
  return r;
}

inline MetricsReport evaluate(PlayerSet& players, std::span<const Document> docs,
                              std::uint64_t seed = 0, int checkpoint = 0) {
  std::vector<int> golds;
  golds.reserve(docs.size());
  for (const auto& d : docs) golds.push_back(d.label);
  const auto preds = predict_labels(players, docs);
  return compute_report(preds, golds, docs, seed, checkpoint);
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> optional_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
  nlohmann::json attrs = nlohmann::json::object();
  for (const auto& m : r.attributes) {
    attrs[eval_attribute_name(m.attribute)] = {{"support", m.support},
                                               {"negatives", m.negatives},
                                               {"f1", optional_json(m.f1)},
                                               {"fpr", optional_json(m.fpr)}};
  }
  j = nlohmann::json{{"f1", r.f1},
                     {"confusion",
                      {{"tp", r.confusion.tp},
                       {"fp", r.confusion.fp},
                       {"tn", r.confusion.tn},
                       {"fn", r.confusion.fn}}},
                     {"attributes", attrs},
                     {"seed", r.seed},
                     {"checkpoint", r.checkpoint},
                     {"selection_fallback", r.selection_fallback},
                     {"diagnostics", r.diagnostics}};
}

inline void from_json(const nlohmann::json& j, MetricsReport& r) {
  r.f1 = j.at("f1").get<double>();
  const auto& c = j.at("confusion");
  r.confusion = {c.at("tp").get<long long>(), c.at("fp").get<long long>(),
                 c.at("tn").get<long long>(), c.at("fn").get<long long>()};
  for (EvalAttribute a : kEvalAttributes) {
    const auto& m = j.at("attributes").at(eval_attribute_name(a));
    auto& out = r.attributes[static_cast<std::size_t>(a)];
    out.attribute = a;
    out.support = m.at("support").get<long long>();
    out.negatives = m.at("negatives").get<long long>();
    out.f1 = optional_from_json(m.at("f1"));
    out.fpr = optional_from_json(m.at("fpr"));
  }
  r.seed = j.at("seed").get<std::uint64_t>();
  r.checkpoint = j.at("checkpoint").get<int>();
  r.selection_fallback = j.value("selection_fallback", false);
  r.diagnostics = j.value("diagnostics", std::map<std::string, double>{});
}

// ---------------------------------------------------------------------------
// Checkpoint selection
// ---------------------------------------------------------------------------

struct SelectionOptions {
  // F1 window below the best dev F1, in percentage points (or a fraction of
  // the best F1 when `relative`).
  double window = 3.0;
  bool relative = false;
  // nullopt = mean of the defined per-attribute FPRs.
  std::optional<EvalAttribute> target;
};

struct Selection {
  int checkpoint = 0;
  std::size_t index = 0;
  bool fallback = false;
};

inline bool within_window(double f1, double best, const SelectionOptions& opt) {
  if (opt.relative) return 100.0 * f1 >= 100.0 * best * (1.0 - opt.window / 100.0);
  return 100.0 * f1 >= 100.0 * best - opt.window;
}

// Max-F1 checkpoint; ties go to the earlier checkpoint.
inline Selection select_max_f1(std::span<const MetricsReport> reports) {
  if (reports.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "no reports to select from");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const auto& a = reports[i];
    const auto& b = reports[best];
    if (a.f1 > b.f1 || (a.f1 == b.f1 && a.checkpoint < b.checkpoint)) best = i;
  }
  return {reports[best].checkpoint, best, false};
}

// Keeps checkpoints within the F1 window of the best, then takes the lowest
// target FPR; ties go to higher F1, then the earlier checkpoint.
inline Selection select_checkpoint(std::span<const MetricsReport> reports,
                                   const SelectionOptions& opt = {}) {
  if (reports.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "no reports to select from");
  }
  double best_f1 = reports[0].f1;
  for (const auto& r : reports) best_f1 = std::max(best_f1, r.f1);
  std::optional<std::size_t> pick;
  double pick_fpr = 0.0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (!within_window(r.f1, best_f1, opt)) continue;
    const auto fpr = r.target_fpr(opt.target);
    if (!fpr) continue;
    bool better = !pick.has_value();
    if (!better) {
      const auto& cur = reports[*pick];
      if (*fpr != pick_fpr) better = *fpr < pick_fpr;
      else if (r.f1 != cur.f1) better = r.f1 > cur.f1;
      else better = r.checkpoint < cur.checkpoint;
    }
    if (better) {
      pick = i;
      pick_fpr = *fpr;
    }
  }
  if (!pick) {
    Selection s = select_max_f1(reports);
    s.fallback = true;
    return s;
  }
  return {reports[*pick].checkpoint, *pick, false};
}

// ---------------------------------------------------------------------------
// Rationale dumps
// ---------------------------------------------------------------------------

struct RationaleRecord {
  std::string id;
  std::vector<std::string> words;
  std::vector<int> keep;
  int prediction = 0;
  int gold = 0;

  // Kept tokens wrapped in **...**.
  std::string marked_text() const {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i > 0) out += ' ';
      out += keep[i] ? "**" + words[i] + "**" : words[i];
    }
    return out;
  }

  std::string text_line() const {
    return id + "\t" + marked_text() + "\tpred=" + (prediction ? "toxic" : "non-toxic") +
           "\tgold=" + (gold ? "toxic" : "non-toxic");
  }

  nlohmann::json to_json() const {
    nlohmann::json tokens = nlohmann::json::array();
    for (std::size_t i = 0; i < words.size(); ++i) {
      tokens.push_back({{"token", words[i]}, {"rationale", keep[i] != 0}});
    }
    return {{"id", id}, {"tokens", tokens}, {"prediction", prediction}, {"gold", gold}};
  }
};

inline std::vector<RationaleRecord> rationale_dump(PlayerSet& players,
                                                   std::span<const Document> docs,
                                                   std::size_t limit) {
  if (!players.has_generator()) {
    throw Error(ErrorKind::kNoGenerator,
                "checkpoint was trained without a rationale generator");
  }
  std::vector<RationaleRecord> out;
  for (const auto& d : docs) {
    if (out.size() >= limit) break;
    const Prediction p = predict(players, d);
    RationaleRecord r;
    r.id = d.id;
    r.words = d.words;
    r.keep = p.mask->hard;
    r.prediction = p.label;
    r.gold = d.label;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Results table
// ---------------------------------------------------------------------------

struct MeanSd {
  std::optional<double> mean;
  std::optional<double> sd;  // sample s.d., absent for a single value
};

inline MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd out;
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  out.mean = mean;
  if (xs.size() > 1) {
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    out.sd = std::sqrt(sq / static_cast<double>(xs.size() - 1));
  }
  return out;
}

// Percent value with the s.d. as a subscript: "91.7_{0.1}".
inline std::string format_cell(const MeanSd& v) {
  if (!v.mean) return "-";
  char buf[64];
  if (v.sd) {
    std::snprintf(buf, sizeof(buf), "%.1f_{%.1f}", 100.0 * *v.mean, 100.0 * *v.sd);
  } else {
    std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * *v.mean);
  }
  return buf;
}

struct TableRow {
  std::string name;
  std::vector<MetricsReport> runs;
};

// Rows = methods, columns = overall F1 then F1/FPR per attribute.
inline std::string render_table(const std::vector<TableRow>& rows) {
  std::vector<std::string> header = {"run", "F1"};
  for (EvalAttribute a : kEvalAttributes) {
    header.push_back(std::string(eval_attribute_name(a)) + " F1");
    header.push_back(std::string(eval_attribute_name(a)) + " FPR");
  }
  std::vector<std::vector<std::string>> cells = {header};
  for (const auto& row : rows) {
    std::vector<std::string> line = {row.name};
    std::vector<double> f1s;
    for (const auto& r : row.runs) f1s.push_back(r.f1);
    line.push_back(format_cell(mean_sd(f1s)));
    for (EvalAttribute a : kEvalAttributes) {
      std::vector<double> af1, afpr;
      for (const auto& r : row.runs) {
        if (r.at(a).f1) af1.push_back(*r.at(a).f1);
        if (r.at(a).fpr) afpr.push_back(*r.at(a).fpr);
      }
      line.push_back(format_cell(mean_sd(af1)));
      line.push_back(format_cell(mean_sd(afpr)));
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c > 0) out << " | ";
      out << std::left << std::setw(static_cast<int>(width[c])) << cells[r][c];
    }
    out << '\n';
    if (r == 0) {
      for (std::size_t c = 0; c < width.size(); ++c) {
        if (c > 0) out << "-+-";
        out << std::string(width[c], '-');
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace invrat

#endif  // INVRAT_EVAL_HPP_
