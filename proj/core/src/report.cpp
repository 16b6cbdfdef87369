#include "neurocat/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fmt/format.h>
#include "json.hpp"
#include <sstream>

#include "neurocat/errors.hpp"

namespace neurocat {

using json = nlohmann::ordered_json;

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "NA";
  auto s = fmt::format("{:.6f}", v);
  return s == "-0.000000" ? "0.000000" : s;
}

std::string pair_label(std::size_t a, std::size_t b) { return fmt::format("K{}K{}", a + 1, b + 1); }

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

json id_json(const NeuronId& id) { return json{{"layer", id.layer}, {"index", id.index}}; }

json test_json(const TestResult& t) {
  json j{{"method", to_string(t.method)}, {"statistic", t.statistic}, {"df", t.df}, {"p_value", t.p_value}};
  if (t.effect_size) j["effect_size"] = *t.effect_size;
  return j;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json partition_json(const Partition& p) {
  json groups = json::array();
  for (const auto& g : p.groups) {
    json tokens = json::array();
    for (const auto& t : g.members) tokens.push_back({{"t", t.token}, {"a", t.activation}});
    groups.push_back({{"label", g.label}, {"size", g.members.size()}, {"mean_activation", g.mean_activation},
                      {"tokens", std::move(tokens)}});
  }
  return groups;
}

json topdown_object(const NeuronTopDownResult& r) {
  json j{{"neuron", id_json(r.id)}, {"backend", r.backend}, {"eligible", r.eligible}};
  for (std::size_t i = 0; i < r.cluster_means.size(); ++i) j[fmt::format("mu_K{}", i + 1)] = r.cluster_means[i];
  for (const auto& s : r.reported) j["delta_" + pair_label(s.first, s.second)] = s.delta;
  for (const auto& s : r.reported) j["d_" + pair_label(s.first, s.second)] = s.cohens_d;
  j["kw"] = r.kw ? test_json(*r.kw) : json(nullptr);
  json ph = json::array();
  for (const auto& p : r.posthoc)
    ph.push_back({{"pair", pair_label(p.pair.first, p.pair.second)},
                  {"z", p.z},
                  {"p_value", p.p_value},
                  {"adjusted_alpha", p.adjusted_alpha},
                  {"significant", p.significant}});
  j["posthoc"] = std::move(ph);
  j["clusters"] = partition_json(r.partition);
  return j;
}

json cells_json(std::span<const InterleaveCell> cells) {
  json arr = json::array();
  for (const auto& c : cells) {
    json j{{"label", c.label}, {"x_min", c.x_min}, {"x_max", c.x_max}, {"n", c.n},       {"m", c.m},
           {"N", c.total},     {"rho", c.rho},     {"eligible", c.eligible}, {"significant", c.significant}};
    j["chi2"] = c.chi2 ? test_json(*c.chi2) : json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr;
}

json bottomup_object(const NeuronBottomUpResult& r) {
  json j{{"neuron", id_json(r.id)}, {"segmentation", to_string(r.segmentation)}};
  for (std::size_t g = 0; g < r.cos.size(); ++g) j[fmt::format("cos_G{}", g + 1)] = optional_json(r.cos[g]);
  for (std::size_t g = 0; g < r.d.size(); ++g) j[fmt::format("d_G{}", g + 1)] = optional_json(r.d[g]);
  j["q3_cos100"] = r.q3_cos;
  j["resolvable"] = r.resolvable;
  j["dropped"] = r.dropped;
  j["partial"] = r.partial;
  j["groups"] = partition_json(r.partition);
  return j;
}

template <class R, class F>
std::string jsonl(std::span<const R> results, std::string_view digest, F&& to_obj) {
  std::string out;
  for (const auto& r : results) {
    json j = to_obj(r);
    j["run_digest"] = digest;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double cell_value(const std::string& s) {
  if (s == "NA" || s.empty()) return 0.0;
  return std::stod(s);
}

const char* const kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

struct Frame {
  double width = 720, height = 400, left = 64, right = 150, top = 48, bottom = 48;
  double lo = 0, hi = 1;

  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
  double y(double v) const { return top + plot_h() * (1.0 - (v - lo) / (hi - lo)); }
};

Frame make_frame(const std::vector<double>& values) {
  Frame f;
  if (!values.empty()) {
    f.lo = std::min(0.0, *std::ranges::min_element(values));
    f.hi = std::max(0.0, *std::ranges::max_element(values));
  }
  if (f.hi - f.lo < 1e-12) f.hi = f.lo + 1.0;
  const double pad = 0.05 * (f.hi - f.lo);
  if (f.lo < 0) f.lo -= pad;
  f.hi += pad;
  return f;
}

void svg_open(std::ostringstream& o, const Frame& f, const RenderOptions& opt) {
  o << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">)",
                   f.width, f.height, f.width, f.height)
    << '\n';
  if (!opt.deterministic) o << "<!-- generated " << timestamp() << " -->\n";
  o << "<desc>run_digest " << xml_escape(opt.run_digest) << "</desc>\n";
  o << fmt::format(R"(<text x="{}" y="24" font-size="15">{}</text>)", f.left, xml_escape(opt.title)) << '\n';
  // axes and ticks
  o << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>)", f.left, f.top, f.left, f.top + f.plot_h())
    << '\n';
  const double zero = f.y(0.0);
  o << fmt::format(R"(<line x1="{}" y1="{:.2f}" x2="{}" y2="{:.2f}" stroke="black"/>)", f.left, zero, f.left + f.plot_w(),
                   zero)
    << '\n';
  for (int t = 0; t <= 4; ++t) {
    const double v = f.lo + (f.hi - f.lo) * t / 4.0;
    o << fmt::format(R"(<text x="{}" y="{:.2f}" text-anchor="end">{}</text>)", f.left - 6, f.y(v) + 4,
                     fmt::format("{:.3g}", v))
      << '\n';
  }
}

void legend(std::ostringstream& o, const Frame& f, std::span<const std::string> names) {
  for (std::size_t s = 0; s < names.size(); ++s) {
    const double y = f.top + 18.0 * static_cast<double>(s);
    o << fmt::format(R"(<rect x="{}" y="{}" width="12" height="12" fill="{}"/>)", f.width - f.right + 16, y,
                     kPalette[s % std::size(kPalette)])
      << '\n';
    o << fmt::format(R"(<text x="{}" y="{}">{}</text>)", f.width - f.right + 34, y + 10, xml_escape(names[s])) << '\n';
  }
}

}  // namespace

std::string topdown_csv(const TopDownAggregate& agg) {
  const auto pairs = reported_pairs(agg.k);
  std::vector<std::string> header, row;
  for (std::size_t i = 0; i < agg.k; ++i) {
    header.push_back(fmt::format("mu_K{}", i + 1));
    row.push_back(num(agg.mu_cluster[i]));
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    header.push_back("delta_" + pair_label(pairs[p].first, pairs[p].second));
    row.push_back(num(agg.mu_delta[p]));
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    header.push_back("d_" + pair_label(pairs[p].first, pairs[p].second));
    row.push_back(num(agg.mu_d[p]));
  }
  header.push_back("n_neuron");
  row.push_back(std::to_string(agg.n_neuron));
  header.push_back("pi_pKW");
  row.push_back(num(agg.pi_kw));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    header.push_back("pi_p" + pair_label(pairs[p].first, pairs[p].second));
    row.push_back(num(agg.pi_pair[p]));
  }
  return join(header) + '\n' + join(row) + '\n';
}

std::string interleaving_csv(const InterleaveAggregate& agg) {
  std::string out = "cluster,n_cells,mu_rho,pi_p_chi2\n";
  for (const auto& r : agg.rows)
    out += join({r.label, std::to_string(r.n_cells), num(r.mu_rho), num(r.pi_significant)}) + '\n';
  return out;
}

std::string bottomup_csv(const BottomUpAggregate& agg) {
  std::string out = "group,n_neuron,mu_cos,mu_d,pi_d_negative,p_chi2\n";
  for (const auto& r : agg.rows)
    out += join({r.label, std::to_string(r.n_neuron), num(r.mu_cos), num(r.mu_d), num(r.pi_negative), num(r.p_chi2)}) +
           '\n';
  return out;
}

std::string topdown_jsonl(std::span<const NeuronTopDownResult> results, std::string_view run_digest) {
  return jsonl(results, run_digest, topdown_object);
}

std::string interleaving_jsonl(std::span<const NeuronInterleavingResult> results, std::string_view run_digest) {
  return jsonl(results, run_digest, [](const NeuronInterleavingResult& r) {
    return json{{"neuron", id_json(r.id)}, {"backend", r.backend}, {"cells", cells_json(r.cells)}};
  });
}

std::string bottomup_jsonl(std::span<const NeuronBottomUpResult> results, std::string_view run_digest) {
  return jsonl(results, run_digest, bottomup_object);
}

std::string failures_jsonl(std::span<const NeuronFailure> failures) {
  std::string out;
  for (const auto& f : failures) out += json{{"neuron", id_json(f.id)}, {"error", f.message}}.dump() + '\n';
  return out;
}

std::string to_json(const NeuronRecord& record) {
  json tokens = json::array();
  for (const auto& t : record.core_tokens) tokens.push_back({{"t", t.token}, {"a", t.activation}});
  return json{{"layer", record.id.layer}, {"neuron", record.id.index}, {"core_tokens", std::move(tokens)}}.dump();
}

std::string to_json(const NeuronTopDownResult& result) { return topdown_object(result).dump(); }
std::string to_json(std::span<const InterleaveCell> cells) { return cells_json(cells).dump(); }
std::string to_json(const NeuronBottomUpResult& result) { return bottomup_object(result).dump(); }

std::string to_json(const TopDownAggregate& agg) {
  const auto csv = parse_csv(topdown_csv(agg));
  json j;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    if (csv.header[c] == "n_neuron")
      j[csv.header[c]] = agg.n_neuron;
    else
      j[csv.header[c]] = cell_value(csv.rows[0][c]);
  }
  return j.dump();
}

std::string to_json(const InterleaveAggregate& agg) {
  json rows = json::array();
  for (const auto& r : agg.rows)
    rows.push_back({{"cluster", r.label}, {"n_cells", r.n_cells}, {"mu_rho", r.mu_rho}, {"pi_p_chi2", r.pi_significant}});
  return json{{"n_neuron", agg.n_neuron}, {"rows", std::move(rows)}}.dump();
}

std::string to_json(const BottomUpAggregate& agg) {
  json rows = json::array();
  for (const auto& r : agg.rows)
    rows.push_back({{"group", r.label},
                    {"n_neuron", r.n_neuron},
                    {"mu_cos", r.mu_cos},
                    {"mu_d", r.mu_d},
                    {"pi_d_negative", r.pi_negative},
                    {"p_chi2", r.p_chi2}});
  return json{{"n_neuron", agg.n_neuron}, {"rows", std::move(rows)}}.dump();
}

std::size_t CsvTable::column(std::string_view name) const {
  auto it = std::ranges::find(header, name);
  if (it == header.end()) throw InvalidArgument("csv: no column " + std::string(name));
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::string_view text) {
  CsvTable t;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t s = 0;
    while (true) {
      auto c = line.find(',', s);
      cells.emplace_back(line.substr(s, c == std::string_view::npos ? std::string_view::npos : c - s));
      if (c == std::string_view::npos) break;
      s = c + 1;
    }
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw ParseError(t.rows.size() + 2, "csv row width differs from header");
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

std::string render_markdown(const CsvTable& table, const RenderOptions& options) {
  std::ostringstream o;
  if (!options.title.empty()) o << "## " << options.title << "\n\n";
  o << "run digest: `" << options.run_digest << "`\n";
  if (!options.deterministic) o << "generated: " << timestamp() << "\n";
  o << '\n';
  o << '|';
  for (const auto& h : table.header) o << ' ' << h << " |";
  o << "\n|";
  for (std::size_t i = 0; i < table.header.size(); ++i) o << "---|";
  o << '\n';
  for (const auto& row : table.rows) {
    o << '|';
    for (const auto& c : row) o << ' ' << c << " |";
    o << '\n';
  }
  return o.str();
}

std::string render_grouped_bars(const CsvTable& table, std::string_view category_column,
                                std::span<const std::string> value_columns, const RenderOptions& options) {
  const auto cat = table.column(category_column);
  std::vector<std::size_t> cols;
  std::vector<double> all;
  for (const auto& name : value_columns) cols.push_back(table.column(name));
  for (const auto& row : table.rows)
    for (auto c : cols) all.push_back(cell_value(row[c]));
  const Frame f = make_frame(all);

  std::ostringstream o;
  svg_open(o, f, options);
  const double slot = f.plot_w() / static_cast<double>(std::max<std::size_t>(1, table.rows.size()));
  const double bar = slot * 0.8 / static_cast<double>(std::max<std::size_t>(1, cols.size()));
  const double zero = f.y(0.0);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double x0 = f.left + slot * static_cast<double>(r) + slot * 0.1;
    for (std::size_t s = 0; s < cols.size(); ++s) {
      const double v = cell_value(table.rows[r][cols[s]]);
      const double y = f.y(v);
      o << fmt::format(R"(<rect x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="{}"><title>{} {}: {}</title></rect>)",
                       x0 + bar * static_cast<double>(s), std::min(y, zero), bar, std::fabs(zero - y),
                       kPalette[s % std::size(kPalette)], xml_escape(table.rows[r][cat]), xml_escape(value_columns[s]),
                       table.rows[r][cols[s]])
        << '\n';
    }
    o << fmt::format(R"(<text x="{:.2f}" y="{}" text-anchor="middle">{}</text>)", x0 + slot * 0.4,
                     f.top + f.plot_h() + 20, xml_escape(table.rows[r][cat]))
      << '\n';
  }
  legend(o, f, value_columns);
  o << "</svg>\n";
  return o.str();
}

std::string render_lines(const CsvTable& table, std::string_view category_column,
                         std::span<const std::string> value_columns, const RenderOptions& options) {
  const auto cat = table.column(category_column);
  std::vector<std::size_t> cols;
  std::vector<double> all;
  for (const auto& name : value_columns) cols.push_back(table.column(name));
  for (const auto& row : table.rows)
    for (auto c : cols) all.push_back(cell_value(row[c]));
  Frame f = make_frame(all);
  if (!all.empty()) {
    // lines read better on a tight range than anchored at zero
    const double lo = *std::ranges::min_element(all), hi = *std::ranges::max_element(all);
    const double pad = std::max(1e-6, 0.1 * (hi - lo));
    f.lo = lo - pad;
    f.hi = hi + pad;
  }

  std::ostringstream o;
  svg_open(o, f, options);
  const std::size_t n = table.rows.size();
  auto x_at = [&](std::size_t r) {
    return n <= 1 ? f.left + f.plot_w() / 2.0 : f.left + f.plot_w() * static_cast<double>(r) / static_cast<double>(n - 1);
  };
  for (std::size_t r = 0; r < n; ++r)
    o << fmt::format(R"(<text x="{:.2f}" y="{}" text-anchor="middle">{}</text>)", x_at(r), f.top + f.plot_h() + 20,
                     xml_escape(table.rows[r][cat]))
      << '\n';
  for (std::size_t s = 0; s < cols.size(); ++s) {
    std::string points;
    for (std::size_t r = 0; r < n; ++r) {
      if (r) points += ' ';
      points += fmt::format("{:.2f},{:.2f}", x_at(r), f.y(cell_value(table.rows[r][cols[s]])));
    }
    o << fmt::format(R"(<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>)", points,
                     kPalette[s % std::size(kPalette)])
      << '\n';
    for (std::size_t r = 0; r < n; ++r)
      o << fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="3" fill="{}"><title>{} {}: {}</title></circle>)", x_at(r),
                       f.y(cell_value(table.rows[r][cols[s]])), kPalette[s % std::size(kPalette)],
                       xml_escape(table.rows[r][cat]), xml_escape(value_columns[s]), table.rows[r][cols[s]])
        << '\n';
  }
  legend(o, f, value_columns);
  o << "</svg>\n";
  return o.str();
}

}  // namespace neurocat
