#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include "tomnet/error.hpp"
#include "tomnet/eval.hpp"
#include "tomnet/stats.hpp"

namespace tomnet {

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pvalue(double p) {
  if (p < 0.001) return "<.001";
  return fixed(p, 3);
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s, std::string_view what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw FormatError("bad " + std::string(what) + " '" + s + "'");
  }
  return v;
}

/// Canonical row order: tables I to V, then anything else by label.
int condition_rank(const std::string& label) {
  const EvalCondition c = EvalCondition::parse(label);
  const int vis = !c.target_visible ? 0 : (*c.target_visible ? 1 : 2);
  switch (c.kind) {
    case ConditionKind::Global: return 0;
    case ConditionKind::TargetHidden: return 1;
    case ConditionKind::TargetVisible: return 2;
    case ConditionKind::Neglected: return 100 + vis * 10 + (10 - c.n);
    case ConditionKind::Aligned: return 200 + vis * 10 + (10 - c.n);
    case ConditionKind::Budget: return 300000 - c.n;
  }
  return 1000000;
}

}  // namespace

std::string sweep_csv(std::span<const SweepRecord> records) {
  std::ostringstream os;
  os << "condition,maps,variant,lr,seed,accuracy\n";
  for (const SweepRecord& r : records) {
    os << r.condition << ',' << r.maps << ',' << variant_name(r.variant) << ','
       << shortest(r.lr) << ',' << r.seed << ','
       << (r.accuracy ? shortest(*r.accuracy) : "NA") << '\n';
  }
  return os.str();
}

std::vector<SweepRecord> parse_sweep_csv(std::string_view text) {
  std::vector<SweepRecord> out;
  std::istringstream is{std::string(text)};
  std::string line;
  if (!std::getline(is, line) || line != "condition,maps,variant,lr,seed,accuracy") {
    throw FormatError("sweep file lacks the expected header");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw FormatError("sweep row with wrong field count");
    SweepRecord r;
    r.condition = f[0];
    EvalCondition::parse(r.condition);
    r.maps = parse_number<int>(f[1], "map count");
    auto v = parse_variant(f[2]);
    if (!v) throw FormatError("bad variant '" + f[2] + "'");
    r.variant = *v;
    r.lr = parse_number<double>(f[3], "learning rate");
    r.seed = parse_number<std::uint64_t>(f[4], "seed");
    if (f[5] != "NA") r.accuracy = parse_number<double>(f[5], "accuracy");
    out.push_back(std::move(r));
  }
  return out;
}

const ReportRow* EvalReport::find(std::string_view condition, int maps) const {
  for (const ReportRow& r : rows) {
    if (r.condition == condition && r.maps == maps) return &r;
  }
  return nullptr;
}

EvalReport build_report(std::span<const SweepRecord> records) {
  using Key = std::tuple<std::string, int, Variant, double>;
  std::map<Key, std::vector<std::pair<std::uint64_t, std::optional<double>>>>
      cells;
  std::map<std::string, int> ranks;
  for (const SweepRecord& r : records) {
    cells[{r.condition, r.maps, r.variant, r.lr}].push_back({r.seed, r.accuracy});
    ranks.emplace(r.condition, condition_rank(r.condition));
  }

  auto summarize = [&](const Key& key) {
    auto runs = cells.at(key);
    std::sort(runs.begin(), runs.end());
    CellSummary s;
    s.lr = std::get<3>(key);
    for (const auto& [seed, acc] : runs) {
      if (acc) s.accuracies.push_back(*acc);
      else ++s.missing;
    }
    if (!s.accuracies.empty()) s.mean = mean(s.accuracies);
    s.var = s.accuracies.size() >= 2 ? sample_variance(s.accuracies) : NAN;
    return s;
  };

  // Best learning rate per (maps, variant): highest mean global accuracy,
  // ties to the smaller rate. Conditions without global runs pick their own.
  auto best_lr = [&](const std::string& condition, int maps, Variant v)
      -> std::optional<double> {
    for (const std::string& c : {std::string("global"), condition}) {
      std::optional<double> best;
      double best_mean = -1.0;
      for (const auto& [key, runs] : cells) {
        if (std::get<0>(key) != c || std::get<1>(key) != maps ||
            std::get<2>(key) != v) {
          continue;
        }
        const CellSummary s = summarize(key);
        if (s.accuracies.empty()) continue;
        if (s.mean > best_mean) {
          best_mean = s.mean;
          best = std::get<3>(key);
        }
      }
      if (best) return best;
    }
    return std::nullopt;
  };

  std::vector<std::pair<std::string, int>> keys;
  for (const auto& [key, runs] : cells) {
    std::pair<std::string, int> k{std::get<0>(key), std::get<1>(key)};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
    return std::tie(ranks[a.first], a.first, a.second) <
           std::tie(ranks[b.first], b.first, b.second);
  });

  EvalReport report;
  for (const auto& [condition, maps] : keys) {
    ReportRow row;
    row.condition = condition;
    row.maps = maps;
    for (Variant v : {Variant::Bel, Variant::NoBel}) {
      const std::string where = condition + " maps=" + std::to_string(maps) +
                                " " + std::string(variant_name(v));
      const auto lr = best_lr(condition, maps, v);
      if (!lr) {
        report.issues.push_back(where + ": no runs");
        continue;
      }
      const Key key{condition, maps, v, *lr};
      if (!cells.contains(key)) {
        report.issues.push_back(where + ": no runs at the selected rate " +
                                shortest(*lr));
        continue;
      }
      CellSummary s = summarize(key);
      if (s.missing > 0) {
        report.issues.push_back(where + ": " + std::to_string(s.missing) +
                                " run(s) with an empty filter");
      }
      if (s.accuracies.empty()) continue;
      if (s.accuracies.size() < 2) {
        report.issues.push_back(where + ": fewer than two seeds");
      }
      (v == Variant::Bel ? row.bel : row.nobel) = std::move(s);
    }
    if (row.bel && row.nobel) {
      row.diff = row.bel->mean - row.nobel->mean;
      if (row.bel->accuracies.size() >= 2 && row.nobel->accuracies.size() >= 2) {
        row.p = welch_t_test(row.bel->accuracies, row.nobel->accuracies).p;
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "condition,maps,variant,lr,mean,var,diff,p\n";
  auto opt = [](const std::optional<double>& v) {
    return v ? shortest(*v) : std::string("NA");
  };
  for (const ReportRow& r : report.rows) {
    for (Variant v : {Variant::Bel, Variant::NoBel}) {
      const auto& cell = v == Variant::Bel ? r.bel : r.nobel;
      os << r.condition << ',' << r.maps << ',' << variant_name(v) << ',';
      if (cell) {
        os << shortest(cell->lr) << ',' << shortest(cell->mean) << ','
           << (std::isnan(cell->var) ? "NA" : shortest(cell->var));
      } else {
        os << "NA,NA,NA";
      }
      os << ',' << opt(r.diff) << ',' << opt(r.p) << '\n';
    }
  }
  return os.str();
}

namespace {

std::string cell_or_na(const std::optional<CellSummary>& c, bool with_lr) {
  if (!c) return with_lr ? "n/a | n/a | n/a" : "n/a | n/a";
  std::string s;
  if (with_lr) s += shortest(c->lr) + " | ";
  s += fixed(c->mean, 2) + " | " + (std::isnan(c->var) ? "n/a" : fixed(c->var, 2));
  return s;
}

std::string diff_p(const ReportRow& r) {
  return (r.diff ? fixed(*r.diff, 2) : "n/a") + " | " +
         (r.p ? pvalue(*r.p) : "n/a");
}

std::vector<int> map_counts(const EvalReport& report) {
  std::vector<int> maps;
  for (const ReportRow& r : report.rows) {
    if (std::find(maps.begin(), maps.end(), r.maps) == maps.end()) {
      maps.push_back(r.maps);
    }
  }
  std::sort(maps.begin(), maps.end());
  return maps;
}

void by_maps_table(std::ostringstream& os, const EvalReport& report,
                   const std::string& title, const std::string& condition) {
  os << "## " << title << "\n\n";
  bool any = false;
  std::ostringstream body;
  for (const ReportRow& r : report.rows) {
    if (r.condition != condition) continue;
    any = true;
    body << "| " << r.maps << " | " << cell_or_na(r.bel, true) << " | "
         << cell_or_na(r.nobel, true) << " | " << diff_p(r) << " |\n";
  }
  if (!any) {
    os << "No data.\n\n";
    return;
  }
  os << "| Train maps (N) | BEL best LR | BEL avg acc (%) | BEL var | "
        "NoBEL best LR | NoBEL avg acc (%) | NoBEL var | Bel-NoBel (%) | "
        "p-value |\n";
  os << "|---|---|---|---|---|---|---|---|---|\n" << body.str() << "\n";
}

void count_tables(std::ostringstream& os, const EvalReport& report,
                  const std::string& title, const std::string& prefix,
                  const std::string& column) {
  os << "## " << title << "\n\n";
  bool any = false;
  for (int maps : map_counts(report)) {
    for (const char* vis : {"visible", "hidden"}) {
      std::ostringstream body;
      for (int n = 3; n >= 1; --n) {
        const ReportRow* r = report.find(
            prefix + std::to_string(n) + "_" + vis, maps);
        if (!r) continue;
        body << "| " << n << " | " << cell_or_na(r->bel, false) << " | "
             << cell_or_na(r->nobel, false) << " | " << diff_p(*r) << " |\n";
      }
      if (body.str().empty()) continue;
      any = true;
      os << "### Target " << (std::string(vis) == "visible" ? "visible" : "not visible")
         << ", " << maps << " maps\n\n";
      os << "| " << column << " | BEL avg acc (%) | BEL var | NoBEL avg acc (%) | "
            "NoBEL var | Bel-NoBel (%) | p-value |\n";
      os << "|---|---|---|---|---|---|---|\n" << body.str() << "\n";
    }
  }
  if (!any) os << "No data.\n\n";
}

}  // namespace

std::string report_markdown(const EvalReport& report) {
  std::ostringstream os;
  os << "# Target prediction accuracy\n\n";
  by_maps_table(os, report, "Table I: all test samples", "global");
  by_maps_table(os, report, "Table II: target not yet seen", "hidden");
  count_tables(os, report, "Table III: neglected distractors", "neglected",
               "Neglected (N)");
  count_tables(os, report, "Table IV: aligned distractors", "aligned",
               "N objects aligned");

  os << "## Table V: observed planner budget\n\n";
  std::vector<int> budgets;
  for (const ReportRow& r : report.rows) {
    const EvalCondition c = EvalCondition::parse(r.condition);
    if (c.kind == ConditionKind::Budget &&
        std::find(budgets.begin(), budgets.end(), c.n) == budgets.end()) {
      budgets.push_back(c.n);
    }
  }
  std::sort(budgets.rbegin(), budgets.rend());
  if (budgets.empty()) os << "No data.\n\n";
  for (int b : budgets) {
    os << "### " << b << " max samples\n\n";
    os << "| Train maps (N) | BEL avg acc (%) | BEL var | NoBEL avg acc (%) | "
          "NoBEL var | Bel-NoBel (%) | p-value |\n";
    os << "|---|---|---|---|---|---|---|\n";
    for (const ReportRow& r : report.rows) {
      if (r.condition != "budget" + std::to_string(b)) continue;
      os << "| " << r.maps << " | " << cell_or_na(r.bel, false) << " | "
         << cell_or_na(r.nobel, false) << " | " << diff_p(r) << " |\n";
    }
    os << "\n";
  }

  if (!report.issues.empty()) {
    os << "## Incomplete cells\n\n";
    for (const std::string& s : report.issues) os << "- " << s << "\n";
    os << "\n";
  }
  return os.str();
}

}  // namespace tomnet
