#include "pb/io.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "pb/errors.hpp"
#include "pb/truncnorm.hpp"

namespace pb {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_char(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream iss(line);
  while (std::getline(iss, tok, delim)) out.push_back(tok);
  if (!line.empty() && line.back() == delim) out.push_back("");
  return out;
}

bool is_missing(const std::string& raw) {
  const std::string t = trim(raw);
  if (t.empty() || t == ".") return true;
  const std::string u = upper(t);
  return u == "NA" || u == "NAN";
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

// Average ranks (1-based) of the finite entries of v, ties averaged.
std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average of i+1..j+1
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Eigen::VectorXd rank_inverse_normal(const Eigen::VectorXd& values) {
  return rank_inverse_normal(values,
                             std::vector<std::string>(static_cast<std::size_t>(values.size()), ""));
}

Eigen::VectorXd rank_inverse_normal(const Eigen::VectorXd& values,
                                    const std::vector<std::string>& strata) {
  if (static_cast<Eigen::Index>(strata.size()) != values.size()) {
    throw InputError("rank_inverse_normal: strata length does not match values");
  }
  Eigen::VectorXd out = values;
  std::map<std::string, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (std::isnan(values(i))) continue;
    groups[strata[static_cast<std::size_t>(i)]].push_back(i);
  }
  if (groups.empty()) throw InputError("rank_inverse_normal: no non-missing values");
  for (const auto& [label, idx] : groups) {
    const std::size_t n = idx.size();
    if (n < 2) {
      throw InputError("rank_inverse_normal: stratum '" + label +
                       "' has fewer than 2 non-missing values");
    }
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = values(idx[k]);
    if (*std::max_element(v.begin(), v.end()) == *std::min_element(v.begin(), v.end())) {
      throw InputError("rank_inverse_normal: stratum '" + label + "' is constant");
    }
    const std::vector<double> ranks = average_ranks(v);
    const double denom = static_cast<double>(n) + 0.25;
    for (std::size_t k = 0; k < n; ++k) {
      out(idx[k]) = std_normal_quantile((ranks[k] - 0.375) / denom);
    }
  }
  return out;
}

Eigen::VectorXd residualize(const Eigen::VectorXd& y, const Eigen::MatrixXd& covariates,
                            const std::vector<std::string>& covariate_names) {
  const Eigen::Index n = y.size();
  if (covariates.rows() != n) {
    throw InputError("residualize: covariate rows do not match phenotype length");
  }
  if (!y.allFinite() || !covariates.allFinite()) {
    throw InputError("residualize: missing values must be filtered out first");
  }
  Eigen::MatrixXd design(n, covariates.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(covariates.cols()) = covariates;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) {
    // Pivots beyond the rank identify the dependent columns.
    std::string names;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < design.cols(); ++k) {
      const Eigen::Index col = perm(k);
      if (col == 0) {
        names += " intercept";
      } else if (static_cast<std::size_t>(col - 1) < covariate_names.size()) {
        names += " " + covariate_names[static_cast<std::size_t>(col - 1)];
      } else {
        names += " column" + std::to_string(col);
      }
    }
    throw InputError("residualize: collinear covariates:" + names);
  }
  return y - design * qr.solve(y);
}

MeanShiftRecord compute_mean_shift(const std::string& phenotype,
                                   const Eigen::VectorXd& sample,
                                   const Eigen::VectorXd& reference, double alpha) {
  if (sample.size() < 2 || reference.size() < 2) {
    throw InputError("compute_mean_shift: need at least 2 values per cohort");
  }
  const double ms = sample.mean();
  const double mr = reference.mean();
  const double sd =
      std::sqrt((sample.array() - ms).square().sum() / static_cast<double>(sample.size() - 1));
  if (!(sd > 0.0)) {
    throw NumericError("compute_mean_shift: sample standard deviation is zero");
  }
  MeanShiftRecord rec;
  rec.phenotype = phenotype;
  rec.delta_hat = (ms - mr) / sd;
  rec.alpha = alpha;
  rec.n_sample = sample.size();
  rec.n_reference = reference.size();
  return rec;
}

bool PhenotypeTable::has_column(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

Eigen::VectorXd PhenotypeTable::numeric_column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw InputError("missing column '" + name + "'");
  const auto c = static_cast<std::size_t>(it - columns.begin());
  Eigen::VectorXd out(n_rows());
  for (Eigen::Index i = 0; i < n_rows(); ++i) {
    const std::string& cell = cells[static_cast<std::size_t>(i)][c];
    out(i) = is_missing(cell) ? std::numeric_limits<double>::quiet_NaN()
                              : parse_double(cell, "column " + name);
  }
  return out;
}

std::vector<std::string> PhenotypeTable::string_column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw InputError("missing column '" + name + "'");
  const auto c = static_cast<std::size_t>(it - columns.begin());
  std::vector<std::string> out;
  out.reserve(cells.size());
  for (const auto& row : cells) out.push_back(trim(row[c]));
  return out;
}

PhenotypeTable read_phenotype_table(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file");
  const bool csv = line.find(',') != std::string::npos;
  PhenotypeTable table;
  for (auto& c : csv ? split_char(line, ',') : split_ws(line)) table.columns.push_back(trim(c));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = csv ? split_char(line, ',') : split_ws(line);
    if (fields.size() != table.columns.size()) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(table.columns.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    table.cells.push_back(std::move(fields));
  }
  return table;
}

namespace {

struct HeaderIndex {
  std::unordered_map<std::string, std::size_t> pos;

  std::optional<std::size_t> find(const std::string& name) const {
    const auto it = pos.find(name);
    if (it == pos.end()) return std::nullopt;
    return it->second;
  }
};

HeaderIndex index_header(const std::vector<std::string>& fields, const std::string& path,
                         const std::vector<std::string>& known,
                         std::vector<std::string>* warnings) {
  HeaderIndex h;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const std::string u = upper(trim(fields[i]));
    if (std::find(known.begin(), known.end(), u) == known.end()) {
      if (warnings) warnings->push_back(path + ": ignoring unknown column '" + fields[i] + "'");
      continue;
    }
    h.pos[u] = i;
  }
  return h;
}

std::size_t require_column(const HeaderIndex& h, const std::string& name,
                           const std::string& path) {
  const auto i = h.find(name);
  if (!i) throw InputError(path + ": missing required column '" + name + "'");
  return *i;
}

}  // namespace

SumStats read_sumstats(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file");
  const auto header = split_ws(line);
  const HeaderIndex h =
      index_header(header, path, {"SNP", "A1", "A2", "N", "Z"}, warnings);
  const std::size_t i_snp = require_column(h, "SNP", path);
  const std::size_t i_a1 = require_column(h, "A1", path);
  const std::size_t i_a2 = require_column(h, "A2", path);
  const std::size_t i_n = require_column(h, "N", path);
  const std::size_t i_z = require_column(h, "Z", path);
  const std::size_t width = header.size();

  SumStats stats;
  {
    // Trait name from the file stem.
    std::string stem = path;
    const auto slash = stem.find_last_of('/');
    if (slash != std::string::npos) stem = stem.substr(slash + 1);
    const auto dot = stem.find('.');
    stats.trait = dot == std::string::npos ? stem : stem.substr(0, dot);
  }
  std::vector<double> n_vals, z_vals;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_ws(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (f.size() != width) {
      throw InputError(where + ": expected " + std::to_string(width) + " fields, got " +
                       std::to_string(f.size()));
    }
    stats.snp.push_back(f[i_snp]);
    stats.a1.push_back(upper(f[i_a1]));
    stats.a2.push_back(upper(f[i_a2]));
    n_vals.push_back(parse_double(f[i_n], where));
    z_vals.push_back(parse_double(f[i_z], where));
  }
  stats.n = Eigen::Map<Eigen::VectorXd>(n_vals.data(), static_cast<Eigen::Index>(n_vals.size()));
  stats.z = Eigen::Map<Eigen::VectorXd>(z_vals.data(), static_cast<Eigen::Index>(z_vals.size()));
  return stats;
}

void write_sumstats(const SumStats& stats, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "SNP\tA1\tA2\tN\tZ\n";
  for (Eigen::Index i = 0; i < stats.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out << stats.snp[k] << '\t' << stats.a1[k] << '\t' << stats.a2[k] << '\t'
        << format_double(stats.n(i)) << '\t' << format_double(stats.z(i)) << '\n';
  }
}

LdScores read_ld_scores(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file");
  const auto header = split_ws(line);
  const HeaderIndex h = index_header(header, path, {"SNP", "L2", "LDSCORE"}, warnings);
  const std::size_t i_snp = require_column(h, "SNP", path);
  std::size_t i_l2;
  if (auto i = h.find("L2")) {
    i_l2 = *i;
  } else if (auto i2 = h.find("LDSCORE")) {
    i_l2 = *i2;
  } else {
    throw InputError(path + ": missing required column 'L2'");
  }
  const std::size_t width = header.size();

  LdScores ld;
  std::vector<double> l2;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_ws(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (f.size() != width) {
      throw InputError(where + ": expected " + std::to_string(width) + " fields, got " +
                       std::to_string(f.size()));
    }
    ld.snp.push_back(f[i_snp]);
    const double v = parse_double(f[i_l2], where);
    if (!(v > 0.0)) throw InputError(where + ": LD score must be positive");
    l2.push_back(v);
  }
  ld.l2 = Eigen::Map<Eigen::VectorXd>(l2.data(), static_cast<Eigen::Index>(l2.size()));
  return ld;
}

void write_ld_scores(const LdScores& ld, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "SNP\tL2\n";
  for (Eigen::Index i = 0; i < ld.size(); ++i) {
    out << ld.snp[static_cast<std::size_t>(i)] << '\t' << format_double(ld.l2(i)) << '\n';
  }
}

std::vector<MeanShiftRecord> read_mean_shifts(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file");
  if (trim(line) != "phenotype,delta,alpha,n_sample,n_reference") {
    throw InputError(path + ": expected header phenotype,delta,alpha,n_sample,n_reference");
  }
  std::vector<MeanShiftRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_char(line, ',');
    const std::string where = path + ":" + std::to_string(line_no);
    if (f.size() != 5) throw InputError(where + ": expected 5 fields");
    MeanShiftRecord rec;
    rec.phenotype = trim(f[0]);
    rec.delta_hat = parse_double(f[1], where);
    rec.alpha = parse_double(f[2], where);
    rec.n_sample = static_cast<Eigen::Index>(parse_double(f[3], where));
    rec.n_reference = static_cast<Eigen::Index>(parse_double(f[4], where));
    if (!std::isfinite(rec.delta_hat)) throw InputError(where + ": delta must be finite");
    if (!(rec.alpha > 0.0 && rec.alpha <= 1.0)) {
      throw InputError(where + ": alpha must lie in (0,1]");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_mean_shifts(const std::vector<MeanShiftRecord>& records, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "phenotype,delta,alpha,n_sample,n_reference\n";
  for (const auto& r : records) {
    out << r.phenotype << ',' << format_double(r.delta_hat) << ',' << format_double(r.alpha)
        << ',' << r.n_sample << ',' << r.n_reference << '\n';
  }
}

// ---------------------------------------------------------------------------

bool Config::has_section(const std::string& section) const {
  return sections.count(section) > 0;
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto it = sections.find(section);
  return it != sections.end() && it->second.count(key) > 0;
}

std::string Config::get_string(const std::string& section, const std::string& key) const {
  if (!has(section, key)) {
    throw InputError("config: missing required key '" + key + "' in [" + section + "]");
  }
  return sections.at(section).at(key);
}

std::string Config::get_string_or(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
  return has(section, key) ? sections.at(section).at(key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
  return parse_double(get_string(section, key), "[" + section + "] " + key);
}

double Config::get_double_or(const std::string& section, const std::string& key,
                             double fallback) const {
  if (!has(section, key)) return fallback;
  return get_double(section, key);
}

std::int64_t Config::get_int_or(const std::string& section, const std::string& key,
                                std::int64_t fallback) const {
  if (!has(section, key)) return fallback;
  const double v = get_double(section, key);
  return static_cast<std::int64_t>(v);
}

bool Config::get_bool_or(const std::string& section, const std::string& key,
                         bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = upper(trim(sections.at(section).at(key)));
  if (v == "TRUE" || v == "1" || v == "YES" || v == "ON") return true;
  if (v == "FALSE" || v == "0" || v == "NO" || v == "OFF") return false;
  throw InputError("config: [" + section + "] " + key + " is not a boolean: " + v);
}

std::vector<double> Config::get_double_list(const std::string& section,
                                            const std::string& key) const {
  std::vector<double> out;
  for (const auto& tok : split_char(get_string(section, key), ',')) {
    if (trim(tok).empty()) continue;
    out.push_back(parse_double(tok, "[" + section + "] " + key));
  }
  if (out.empty()) throw InputError("config: [" + section + "] " + key + " is empty");
  return out;
}

std::vector<std::string> Config::subsections(const std::string& prefix) const {
  std::vector<std::string> out;
  const std::string want = prefix + " ";
  for (const auto& name : section_order) {
    if (name.rfind(want, 0) == 0) out.push_back(trim(name.substr(want.size())));
  }
  return out;
}

Config read_config(const std::string& path) {
  std::ifstream in = open_input(path);
  Config cfg;
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw InputError(path + ":" + std::to_string(line_no) + ": unterminated section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      if (!cfg.sections.count(section)) {
        cfg.section_order.push_back(section);
        cfg.sections[section] = {};
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw InputError(path + ":" + std::to_string(line_no) + ": empty key");
    }
    if (!cfg.sections.count(section)) {
      cfg.section_order.push_back(section);
      cfg.sections[section] = {};
    }
    cfg.sections[section][key] = value;
  }
  return cfg;
}

// ---------------------------------------------------------------------------

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "phenotype,estimate_type,original,adjusted,se_original,se_adjusted,warning\n";
  for (const auto& r : rows) {
    out << r.phenotype << ',' << r.estimate_type << ',' << format_double(r.original) << ','
        << format_double(r.adjusted) << ',' << format_double(r.se_original) << ','
        << format_double(r.se_adjusted) << ',' << r.warning << '\n';
  }
}

void write_results_jsonl(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out = open_output(path);
  for (const auto& r : rows) {
    nlohmann::json j;
    j["phenotype"] = r.phenotype;
    j["estimate_type"] = r.estimate_type;
    j["original"] = r.original;
    j["adjusted"] = r.adjusted;
    j["se_original"] = r.se_original;
    j["se_adjusted"] = r.se_adjusted;
    j["warning"] = r.warning;
    for (const auto& [k, v] : r.extra) j[k] = v;
    out << j.dump() << '\n';
  }
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& context) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw InputError(context + ": not a number: '" + text + "'");
  }
  return v;
}

std::string file_digest_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out = open_output(path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pb
