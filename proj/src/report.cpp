#include "agirisk/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "agirisk/error.hpp"

namespace agirisk {
namespace {

constexpr int kLedgerFields = 30;

int flags_of(const MetricsReport& m) {
  return (m.precision_defined ? 1 : 0) | (m.recall_defined ? 2 : 0) |
         (m.f1_defined ? 4 : 0) | (m.specificity_defined ? 8 : 0) |
         (m.auc_defined ? 16 : 0);
}

void flags_into(MetricsReport& m, int flags) {
  m.precision_defined = flags & 1;
  m.recall_defined = flags & 2;
  m.f1_defined = flags & 4;
  m.specificity_defined = flags & 8;
  m.auc_defined = flags & 16;
}

void append_metrics(std::string& row, const MetricsReport& m) {
  row += ',' + std::to_string(m.cm.tp) + ',' + std::to_string(m.cm.fp) + ',' +
         std::to_string(m.cm.fn) + ',' + std::to_string(m.cm.tn);
  for (double v : {m.accuracy, m.precision, m.recall, m.specificity, m.f1,
                   m.auc, m.youden_j})
    row += ',' + format_value(v);
  row += ',' + std::to_string(flags_of(m));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

double to_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError("bad number in ledger: '" + s + "'");
  return v;
}

MetricsReport metrics_from(const std::vector<std::string>& f, size_t at) {
  MetricsReport m;
  m.cm.tp = std::stoll(f[at]);
  m.cm.fp = std::stoll(f[at + 1]);
  m.cm.fn = std::stoll(f[at + 2]);
  m.cm.tn = std::stoll(f[at + 3]);
  m.accuracy = to_double(f[at + 4]);
  m.precision = to_double(f[at + 5]);
  m.recall = to_double(f[at + 6]);
  m.specificity = to_double(f[at + 7]);
  m.f1 = to_double(f[at + 8]);
  m.auc = to_double(f[at + 9]);
  m.youden_j = to_double(f[at + 10]);
  flags_into(m, std::stoi(f[at + 11]));
  return m;
}

std::string sanitize_note(std::string note) {
  std::replace(note.begin(), note.end(), ',', ';');
  std::replace(note.begin(), note.end(), '\n', ' ');
  return note;
}

MetricStats stats_of(const std::vector<double>& values) {
  MetricStats s;
  s.n = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / s.n);
  return s;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string stat_cell(const MetricStats& s) {
  return s.n == 0 ? std::string("-") : fmt3(s.mean) + " +/- " + fmt3(s.sd);
}

}  // namespace

std::string ledger_row(const RepetitionResult& r) {
  std::string row = r.combo_id + ',' + std::to_string(r.combo_index) + ',' +
                    std::string(subset_name(r.subset)) + ',' +
                    std::to_string(r.repetition) + ',' +
                    (r.degenerate ? "1" : "0") + ',' + sanitize_note(r.note);
  append_metrics(row, r.validation);
  append_metrics(row, r.test);
  return row;
}

std::string ledger_header(const std::string& config_hash,
                          std::uint64_t cohort_seed,
                          std::uint64_t experiment_seed) {
  std::string h = "# agirisk-ledger v1\n";
  h += "# config=" + config_hash + " cohort_seed=" +
       std::to_string(cohort_seed) + " experiment_seed=" +
       std::to_string(experiment_seed) + "\n";
  h +=
      "combo_id,combo_index,subset,repetition,degenerate,note,"
      "val_tp,val_fp,val_fn,val_tn,val_accuracy,val_precision,val_recall,"
      "val_specificity,val_f1,val_auc,val_youden,val_flags,"
      "test_tp,test_fp,test_fn,test_tn,test_accuracy,test_precision,"
      "test_recall,test_specificity,test_f1,test_auc,test_youden,test_flags\n";
  return h;
}

LedgerContents read_ledger(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ledger: " + path);
  LedgerContents contents;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const size_t at = line.find("config=");
      if (at != std::string::npos) {
        const size_t end = line.find(' ', at);
        contents.config_hash =
            line.substr(at + 7, end == std::string::npos ? std::string::npos
                                                         : end - at - 7);
        if (end != std::string::npos)
          contents.seed_provenance = line.substr(end + 1);
      }
      continue;
    }
    if (line.rfind("combo_id,", 0) == 0) continue;
    try {
      const auto f = split_fields(line);
      if (f.size() != kLedgerFields)
        throw ParseError("ledger row has " + std::to_string(f.size()) +
                         " fields");
      RepetitionResult r;
      r.combo_id = f[0];
      r.combo_index = std::stoi(f[1]);
      r.subset = subset_from_name(f[2]);
      r.repetition = std::stoi(f[3]);
      r.degenerate = f[4] == "1";
      r.note = f[5];
      r.validation = metrics_from(f, 6);
      r.test = metrics_from(f, 18);
      contents.rows.push_back(std::move(r));
    } catch (const std::exception&) {
      ++contents.warnings;
    }
  }
  return contents;
}

void sort_canonical(std::vector<RepetitionResult>& rows) {
  std::sort(rows.begin(), rows.end(),
            [](const RepetitionResult& a, const RepetitionResult& b) {
              const int ia = a.combo_index < 0 ? INT32_MAX : a.combo_index;
              const int ib = b.combo_index < 0 ? INT32_MAX : b.combo_index;
              return std::tie(a.subset, ia, a.combo_id, a.repetition) <
                     std::tie(b.subset, ib, b.combo_id, b.repetition);
            });
}

void write_ledger(const std::string& path, const std::string& header,
                  std::vector<RepetitionResult> rows) {
  sort_canonical(rows);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write ledger: " + path);
  out << header;
  for (const RepetitionResult& r : rows) out << ledger_row(r) << '\n';
  if (!out) throw IoError("failed writing ledger: " + path);
}

ExperimentReport aggregate_report(const std::vector<RepetitionResult>& rows) {
  bool any_usable = false;
  for (const RepetitionResult& r : rows) any_usable |= !r.degenerate;
  if (!any_usable)
    throw Error("aggregate_report: every repetition is degenerate");

  std::map<std::pair<int, std::string>, std::vector<const RepetitionResult*>>
      groups;
  ExperimentReport report;
  for (const RepetitionResult& r : rows) {
    groups[{static_cast<int>(r.subset), r.combo_id}].push_back(&r);
    report.has_ampm |= r.subset != Subset::full;
  }

  for (const auto& [key, members] : groups) {
    ComboAggregate agg;
    agg.subset = static_cast<Subset>(key.first);
    agg.combo_id = key.second;
    agg.combo_index = members.front()->combo_index;
    std::vector<double> va, vp, vr, vf, vauc, vj, ta, tp, tr, tf, tauc, tj;
    for (const RepetitionResult* r : members) {
      ++agg.repetitions;
      if (r->degenerate) {
        ++agg.degenerate;
        continue;
      }
      va.push_back(r->validation.accuracy);
      vp.push_back(r->validation.precision);
      vr.push_back(r->validation.recall);
      vf.push_back(r->validation.f1);
      vauc.push_back(r->validation.auc);
      vj.push_back(r->validation.youden_j);
      ta.push_back(r->test.accuracy);
      tp.push_back(r->test.precision);
      tr.push_back(r->test.recall);
      tf.push_back(r->test.f1);
      tauc.push_back(r->test.auc);
      tj.push_back(r->test.youden_j);
      agg.pooled_validation += r->validation.cm;
      agg.pooled_test += r->test.cm;
    }
    agg.val_accuracy = stats_of(va);
    agg.val_precision = stats_of(vp);
    agg.val_recall = stats_of(vr);
    agg.val_f1 = stats_of(vf);
    agg.val_auc = stats_of(vauc);
    agg.val_youden = stats_of(vj);
    agg.test_accuracy = stats_of(ta);
    agg.test_precision = stats_of(tp);
    agg.test_recall = stats_of(tr);
    agg.test_f1 = stats_of(tf);
    agg.test_auc = stats_of(tauc);
    agg.test_youden = stats_of(tj);
    report.combos.push_back(std::move(agg));
  }
  std::sort(report.combos.begin(), report.combos.end(),
            [](const ComboAggregate& a, const ComboAggregate& b) {
              const int ia = a.combo_index < 0 ? INT32_MAX : a.combo_index;
              const int ib = b.combo_index < 0 ? INT32_MAX : b.combo_index;
              return std::tie(a.subset, ia, a.combo_id) <
                     std::tie(b.subset, ib, b.combo_id);
            });
  return report;
}

namespace {

const ComboAggregate* find_best_full(const ExperimentReport& report) {
  const ComboAggregate* best = nullptr;
  for (const ComboAggregate& c : report.combos) {
    if (c.subset != Subset::full || c.combo_index < 0 || c.val_youden.n == 0)
      continue;
    if (!best || c.val_youden.mean > best->val_youden.mean ||
        (c.val_youden.mean == best->val_youden.mean &&
         c.val_recall.mean > best->val_recall.mean))
      best = &c;
  }
  return best;
}

// The comparison set mirrors the published five-model figure: the best
// combo per architecture x class-weights cell, plus the forest baseline.
std::vector<const ComboAggregate*> comparison_models(
    const ExperimentReport& report) {
  std::map<std::string, const ComboAggregate*> cells;
  const ComboAggregate* rf = nullptr;
  for (const ComboAggregate& c : report.combos) {
    if (c.subset != Subset::full) continue;
    if (c.combo_index < 0) {
      rf = &c;
      continue;
    }
    if (c.val_youden.n == 0) continue;
    const bool bilstm = c.combo_id.find("bilstm") != std::string::npos;
    const bool cw = c.combo_id.find("cw1") != std::string::npos;
    const std::string cell =
        std::string(bilstm ? "bilstm" : "lstm") + (cw ? "+cw" : "");
    auto it = cells.find(cell);
    if (it == cells.end() || c.val_youden.mean > it->second->val_youden.mean)
      cells[cell] = &c;
  }
  std::vector<const ComboAggregate*> out;
  for (const auto& [cell, agg] : cells) out.push_back(agg);
  if (rf) out.push_back(rf);
  return out;
}

std::string model_label(const ComboAggregate& c) {
  if (c.combo_index < 0) return c.combo_id;
  const bool bilstm = c.combo_id.find("bilstm") != std::string::npos;
  const bool cw = c.combo_id.find("cw1") != std::string::npos;
  return std::string(bilstm ? "B-LSTM" : "LSTM") + (cw ? " (weighted)" : "") +
         " [" + c.combo_id + "]";
}

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::string& config_hash,
                     const std::vector<std::string>& series_names,
                     const std::vector<std::string>& group_names,
                     const std::vector<std::vector<double>>& values) {
  // values[series][group], each expected in [0, 1]; negatives clamp to 0.
  const int width = 880, height = 420;
  const int left = 60, bottom = 60, top = 50, right = 30;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const size_t n_groups = group_names.size();
  const size_t n_series = series_names.size();
  static const char* kPalette[] = {"#4878d0", "#ee854a", "#6acc64",
                                   "#d65f5f", "#956cb4", "#8c613c"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  svg << "<!-- config=" << config_hash << " -->\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << title << "</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double frac = tick / 4.0;
    const double y = top + plot_h * (1.0 - frac);
    svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\""
        << width - right << "\" y2=\"" << y
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << fmt3(frac) << "</text>\n";
  }
  const double group_w = plot_w / static_cast<double>(n_groups);
  const double bar_w = group_w * 0.8 / static_cast<double>(n_series);
  for (size_t g = 0; g < n_groups; ++g) {
    for (size_t s = 0; s < n_series; ++s) {
      const double v = std::max(0.0, std::min(1.0, values[s][g]));
      const double x = left + group_w * static_cast<double>(g) +
                       group_w * 0.1 + bar_w * static_cast<double>(s);
      const double h = plot_h * v;
      svg << "<rect x=\"" << x << "\" y=\"" << top + plot_h - h
          << "\" width=\"" << bar_w * 0.92 << "\" height=\"" << h
          << "\" fill=\"" << kPalette[s % 6] << "\"/>\n";
    }
    svg << "<text x=\""
        << left + group_w * (static_cast<double>(g) + 0.5) << "\" y=\""
        << height - bottom + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\">"
        << group_names[g] << "</text>\n";
  }
  for (size_t s = 0; s < n_series; ++s) {
    const double x = left + 10 + 200.0 * static_cast<double>(s % 4);
    const double y = height - 18 - 16.0 * static_cast<double>(s / 4);
    svg << "<rect x=\"" << x << "\" y=\"" << y - 10
        << "\" width=\"12\" height=\"12\" fill=\"" << kPalette[s % 6]
        << "\"/>\n";
    svg << "<text x=\"" << x + 16 << "\" y=\"" << y
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << series_names[s]
        << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write chart: " + path);
  out << svg.str();
}

void metrics_table_row(std::ostream& out, const std::string& label,
                       const ComboAggregate& c) {
  out << "| " << label << " | " << stat_cell(c.test_accuracy) << " | "
      << stat_cell(c.test_precision) << " | " << stat_cell(c.test_recall)
      << " | " << stat_cell(c.test_f1) << " | " << stat_cell(c.test_auc)
      << " | " << stat_cell(c.test_youden) << " |\n";
}

}  // namespace

void write_report(const std::string& out_dir,
                  const std::vector<RepetitionResult>& rows,
                  const std::string& config_hash, int warnings,
                  const std::string& seed_provenance) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir + "/charts", ec);
  if (ec) throw IoError("cannot create charts directory under " + out_dir);

  const ExperimentReport report = aggregate_report(rows);

  int degenerate = 0;
  for (const RepetitionResult& r : rows) degenerate += r.degenerate ? 1 : 0;

  std::ostringstream md;
  md << "# Agitation-risk experiment report\n\n";
  md << "- config hash: `" << config_hash << "`\n";
  if (!seed_provenance.empty()) md << "- seeds: " << seed_provenance << "\n";
  md << "- repetition rows: " << rows.size() << " (degenerate: " << degenerate
     << ", ledger warnings: " << warnings << ")\n\n";

  md << "## Validation ranking (full dataset)\n\n";
  md << "Mean over non-degenerate repetitions, sorted by validation "
        "Youden's J.\n\n";
  md << "| combo | reps | val J | val recall | val AUC | test J | test "
        "recall |\n";
  md << "|---|---|---|---|---|---|---|\n";
  std::vector<const ComboAggregate*> ranked;
  for (const ComboAggregate& c : report.combos)
    if (c.subset == Subset::full && c.combo_index >= 0) ranked.push_back(&c);
  std::sort(ranked.begin(), ranked.end(),
            [](const ComboAggregate* a, const ComboAggregate* b) {
              if (a->val_youden.n == 0 || b->val_youden.n == 0)
                return a->val_youden.n > b->val_youden.n;
              if (a->val_youden.mean != b->val_youden.mean)
                return a->val_youden.mean > b->val_youden.mean;
              return a->combo_id < b->combo_id;
            });
  for (const ComboAggregate* c : ranked) {
    md << "| " << c->combo_id << " | " << (c->repetitions - c->degenerate)
       << "/" << c->repetitions << " | " << stat_cell(c->val_youden) << " | "
       << stat_cell(c->val_recall) << " | " << stat_cell(c->val_auc) << " | "
       << stat_cell(c->test_youden) << " | " << stat_cell(c->test_recall)
       << " |\n";
  }
  md << "\n";

  const ComboAggregate* best = find_best_full(report);
  if (best) {
    md << "## Selected configuration\n\n";
    md << "Best combo by mean validation Youden's J: `" << best->combo_id
       << "`\n\n";
    md << "| model | accuracy | precision | recall | F1 | AUC | Youden J |\n";
    md << "|---|---|---|---|---|---|---|\n";
    metrics_table_row(md, best->combo_id, *best);
    md << "\nPooled test confusion matrix (tp fp / fn tn): "
       << best->pooled_test.tp << " " << best->pooled_test.fp << " / "
       << best->pooled_test.fn << " " << best->pooled_test.tn << "\n\n";
  }

  const auto models = comparison_models(report);
  if (!models.empty()) {
    md << "## Model comparison (test means)\n\n";
    md << "| model | accuracy | precision | recall | F1 | AUC | Youden J |\n";
    md << "|---|---|---|---|---|---|---|\n";
    for (const ComboAggregate* c : models)
      metrics_table_row(md, model_label(*c), *c);
    md << "\nPooled test confusion matrices:\n\n";
    for (const ComboAggregate* c : models) {
      md << "- " << model_label(*c) << ": tp=" << c->pooled_test.tp
         << " fp=" << c->pooled_test.fp << " fn=" << c->pooled_test.fn
         << " tn=" << c->pooled_test.tn << "\n";
    }
    md << "\n";

    const std::vector<std::string> metric_names = {"accuracy", "precision",
                                                   "recall",   "F1",
                                                   "AUC",      "Youden J"};
    std::vector<std::string> series;
    std::vector<std::vector<double>> values;
    for (const ComboAggregate* c : models) {
      series.push_back(model_label(*c));
      values.push_back({c->test_accuracy.mean, c->test_precision.mean,
                        c->test_recall.mean, c->test_f1.mean,
                        c->test_auc.mean, c->test_youden.mean});
    }
    write_bar_chart(out_dir + "/charts/metrics.svg",
                    "Test metrics by model (mean over repetitions)",
                    config_hash, series, metric_names, values);
    md << "![model comparison](charts/metrics.svg)\n\n";
  }

  if (report.has_ampm && best) {
    md << "## AM/PM comparison\n\n";
    md << "Selected combo `" << best->combo_id
       << "` retrained on time-of-day subsets (membership by the parent "
          "alert's creation hour).\n\n";
    md << "| dataset | accuracy | precision | recall | F1 | AUC | Youden J "
          "|\n";
    md << "|---|---|---|---|---|---|---|\n";
    std::vector<std::string> series;
    std::vector<std::vector<double>> values;
    for (Subset subset : {Subset::full, Subset::am, Subset::pm}) {
      const ComboAggregate* found = nullptr;
      for (const ComboAggregate& c : report.combos)
        if (c.subset == subset && c.combo_id == best->combo_id) found = &c;
      if (!found) continue;
      metrics_table_row(md, std::string(subset_name(subset)), *found);
      series.emplace_back(subset_name(subset));
      values.push_back({found->test_accuracy.mean, found->test_precision.mean,
                        found->test_recall.mean, found->test_f1.mean,
                        found->test_auc.mean, found->test_youden.mean});
    }
    md << "\n";
    const std::vector<std::string> metric_names = {"accuracy", "precision",
                                                   "recall",   "F1",
                                                   "AUC",      "Youden J"};
    write_bar_chart(out_dir + "/charts/ampm.svg",
                    "Full vs AM vs PM (test means, selected combo)",
                    config_hash, series, metric_names, values);
    md << "![am/pm comparison](charts/ampm.svg)\n\n";
  }

  std::ofstream out(out_dir + "/report.md", std::ios::trunc);
  if (!out) throw IoError("cannot write report under " + out_dir);
  out << md.str();
  if (!out) throw IoError("failed writing report under " + out_dir);
}

}  // namespace agirisk
