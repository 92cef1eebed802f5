#include "trader/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "trader/error.hpp"

namespace trader {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_real(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (token.empty() || ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex_digest(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::create(Eigen::MatrixXd x, Eigen::VectorXd y, bool has_intercept) {
  if (x.rows() < 1) throw ValidationError("dataset has no rows");
  if (x.cols() < 1) throw ValidationError("dataset has no covariates");
  if (y.size() != x.rows()) throw ValidationError("response length does not match the number of rows");
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (!std::isfinite(x(i, j))) {
        throw LoadError("non-finite value at row " + std::to_string(i + 1) + ", column " + std::to_string(j + 1),
                        static_cast<std::size_t>(i + 1), static_cast<std::size_t>(j + 1));
      }
    }
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) {
      throw LoadError("non-finite response at row " + std::to_string(i + 1), static_cast<std::size_t>(i + 1),
                      static_cast<std::size_t>(x.cols() + 1));
    }
  }
  return Dataset(std::move(x), std::move(y), has_intercept);
}

Dataset Dataset::empty(Eigen::Index p, bool has_intercept) {
  if (p < 0) throw ValidationError("negative dimension");
  return Dataset(Eigen::MatrixXd(0, p), Eigen::VectorXd(0), has_intercept);
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(rows.size()), p());
  Eigen::VectorXd ys(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Eigen::Index i = rows[r];
    if (i < 0 || i >= n()) throw ValidationError("row index out of range");
    xs.row(static_cast<Eigen::Index>(r)) = x_.row(i);
    ys[static_cast<Eigen::Index>(r)] = y_[i];
  }
  return Dataset(std::move(xs), std::move(ys), has_intercept_);
}

Dataset parse_dataset_csv(const std::string& text, bool has_intercept) {
  std::vector<std::string_view> lines = lines_of(text);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw LoadError("no rows");
  const auto header = split(lines.front(), ',');
  std::ptrdiff_t y_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "y") {
      if (y_col >= 0) throw LoadError("duplicate \"y\" column", 1, c + 1);
      y_col = static_cast<std::ptrdiff_t>(c);
    }
  }
  if (y_col < 0) throw LoadError("missing \"y\" column", 1);
  const std::size_t n_rows = lines.size() - 1;
  if (n_rows == 0) throw LoadError("no rows");
  const auto p = static_cast<Eigen::Index>(header.size() - 1);
  if (p < 1) throw LoadError("no covariate columns", 1);

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n_rows), p);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n_rows));
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t file_row = r + 2;
    const auto fields = split(lines[r + 1], ',');
    if (fields.size() != header.size()) {
      throw LoadError("ragged row " + std::to_string(file_row) + ": expected " + std::to_string(header.size()) +
                          " fields, found " + std::to_string(fields.size()),
                      file_row);
    }
    Eigen::Index xc = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = parse_real(fields[c]);
      if (!v) {
        throw LoadError("malformed number \"" + std::string(fields[c]) + "\" at row " + std::to_string(file_row) +
                            ", column " + std::to_string(c + 1),
                        file_row, c + 1);
      }
      if (!std::isfinite(*v)) {
        throw LoadError("non-finite value at row " + std::to_string(file_row) + ", column " + std::to_string(c + 1),
                        file_row, c + 1);
      }
      if (static_cast<std::ptrdiff_t>(c) == y_col) {
        y[static_cast<Eigen::Index>(r)] = *v;
      } else {
        x(static_cast<Eigen::Index>(r), xc++) = *v;
      }
    }
  }
  return Dataset::create(std::move(x), std::move(y), has_intercept);
}

Dataset load_dataset(const fs::path& path) { return parse_dataset_csv(read_file(path)); }

void save_dataset(const Dataset& data, const fs::path& path) {
  std::string out;
  for (Eigen::Index j = 0; j < data.p(); ++j) out += "x" + std::to_string(j + 1) + ",";
  out += "y\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      out += format_real(data.x()(i, j));
      out += ',';
    }
    out += format_real(data.y()[i]);
    out += '\n';
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Sources

std::vector<SourceEstimate> parse_sources(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw LoadError(std::string("malformed source bundle: ") + e.what());
  }
  if (!doc.is_array()) throw LoadError("source bundle must be an array");
  std::vector<SourceEstimate> out;
  for (std::size_t k = 0; k < doc.size(); ++k) {
    const json& item = doc[k];
    if (!item.is_object() || !item.contains("id") || !item["id"].is_string()) {
      throw LoadError("source " + std::to_string(k + 1) + " lacks a string \"id\"");
    }
    SourceEstimate s;
    s.id = item["id"].get<std::string>();
    if (!item.contains("omega_hat") || !item["omega_hat"].is_array()) {
      throw LoadError("source " + s.id + " lacks an \"omega_hat\" array");
    }
    const json& w = item["omega_hat"];
    s.omega_hat.resize(static_cast<Eigen::Index>(w.size()));
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (!w[j].is_number()) throw LoadError("non-numeric omega_hat entry in source " + s.id, 0, j + 1);
      s.omega_hat[static_cast<Eigen::Index>(j)] = w[j].get<double>();
      if (!std::isfinite(s.omega_hat[static_cast<Eigen::Index>(j)])) {
        throw LoadError("non-finite omega_hat entry in source " + s.id, 0, j + 1);
      }
    }
    if (item.contains("intercept_hat") && !item["intercept_hat"].is_null()) {
      if (!item["intercept_hat"].is_number()) throw LoadError("non-numeric intercept_hat in source " + s.id);
      s.intercept_hat = item["intercept_hat"].get<double>();
    }
    if (!out.empty() && s.omega_hat.size() != out.front().omega_hat.size()) {
      throw LoadError("length mismatch: " + s.id);
    }
    if (s.omega_hat.size() == 0 || s.omega_hat.norm() == 0.0) throw LoadError("zero-norm source: " + s.id);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SourceEstimate> load_sources(const fs::path& path) { return parse_sources(read_file(path)); }

std::string sources_to_json(const std::vector<SourceEstimate>& sources) {
  // Hand-rolled so every number carries 17 significant digits.
  std::string out = "[\n";
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const auto& s = sources[k];
    out += "  {\"id\": " + json(s.id).dump() + ", \"omega_hat\": [";
    for (Eigen::Index j = 0; j < s.omega_hat.size(); ++j) {
      if (j) out += ", ";
      out += format_real(s.omega_hat[j]);
    }
    out += "]";
    if (s.intercept_hat) out += ", \"intercept_hat\": " + format_real(*s.intercept_hat);
    out += k + 1 < sources.size() ? "},\n" : "}\n";
  }
  out += "]\n";
  return out;
}

// ---------------------------------------------------------------------------
// Config

void TraderConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(what);
  };
  require(!psi_hat || *psi_hat > 0.0, "psi_hat must be positive");
  require(!tau_override || *tau_override > 0.0, "tau_override must be positive");
  require(zeta > 0.0, "zeta must be positive");
  require(nu > 0.0, "nu must be positive");
  require(validation_fraction > 0.0 && validation_fraction < 1.0, "validation_fraction must lie in (0,1)");
  require(n_warmup > 0, "n_warmup must be positive");
  require(n_samples > 0, "n_samples must be positive");
  require(n_chains > 0, "n_chains must be positive");
  require(eta_proposal_concentration > 0.0, "eta_proposal_concentration must be positive");
  require(ci_level > 0.0 && ci_level < 1.0, "ci_level must lie in (0,1)");
  require(theta_floor > 0.0, "theta_floor must be positive");
}

std::string TraderConfig::to_text() const {
  std::string out;
  auto line = [&out](const char* key, const std::string& value) { out += std::string(key) + " = " + value + "\n"; };
  line("psi_hat", psi_hat ? format_real(*psi_hat) : "auto");
  line("tau_override", tau_override ? format_real(*tau_override) : "none");
  line("zeta", format_real(zeta));
  line("nu", format_real(nu));
  line("validation_fraction", format_real(validation_fraction));
  line("n_warmup", std::to_string(n_warmup));
  line("n_samples", std::to_string(n_samples));
  line("n_chains", std::to_string(n_chains));
  line("seed", std::to_string(seed));
  line("eta_proposal_concentration", format_real(eta_proposal_concentration));
  line("ci_level", format_real(ci_level));
  line("theta_floor", format_real(theta_floor));
  return out;
}

std::string TraderConfig::digest() const { return hex_digest(to_text()); }

TraderConfig parse_config(const std::string& text, TraderConfig base) {
  const auto lines = lines_of(text);
  for (std::size_t r = 0; r < lines.size(); ++r) {
    std::string_view line = trim(lines[r]);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw LoadError("expected key = value", r + 1);
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    auto real = [&]() {
      const auto v = parse_real(value);
      if (!v || !std::isfinite(*v)) throw LoadError("malformed value for " + key, r + 1);
      return *v;
    };
    auto integer = [&]() -> long long {
      long long v = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
        throw LoadError("malformed integer for " + key, r + 1);
      }
      return v;
    };
    if (key == "psi_hat") {
      base.psi_hat = value == "auto" ? std::nullopt : std::optional<double>(real());
    } else if (key == "tau_override") {
      base.tau_override = value == "none" ? std::nullopt : std::optional<double>(real());
    } else if (key == "zeta") {
      base.zeta = real();
    } else if (key == "nu") {
      base.nu = real();
    } else if (key == "validation_fraction") {
      base.validation_fraction = real();
    } else if (key == "n_warmup") {
      base.n_warmup = static_cast<int>(integer());
    } else if (key == "n_samples") {
      base.n_samples = static_cast<int>(integer());
    } else if (key == "n_chains") {
      base.n_chains = static_cast<int>(integer());
    } else if (key == "seed") {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
        throw LoadError("malformed integer for seed", r + 1);
      }
      base.seed = v;
    } else if (key == "eta_proposal_concentration") {
      base.eta_proposal_concentration = real();
    } else if (key == "ci_level") {
      base.ci_level = real();
    } else if (key == "theta_floor") {
      base.theta_floor = real();
    } else {
      throw LoadError("unknown config key \"" + key + "\"", r + 1);
    }
  }
  base.validate();
  return base;
}

TraderConfig load_config(const fs::path& path, TraderConfig base) { return parse_config(read_file(path), base); }

// ---------------------------------------------------------------------------
// Draws

void PosteriorDraws::validate() const {
  const Eigen::Index s = beta.rows();
  if (sigma2.size() != s || lambda.rows() != s || eta.rows() != s || (intercept.size() != 0 && intercept.size() != s)) {
    throw ValidationError("draw arrays disagree on the number of draws");
  }
  if (lambda.cols() != beta.cols()) throw ValidationError("lambda and beta disagree on p");
  if (eta.cols() < 1) throw ValidationError("eta must have at least one component");
  for (Eigen::Index i = 0; i < s; ++i) {
    if (!(sigma2[i] > 0.0) || !std::isfinite(sigma2[i])) {
      throw ValidationError("non-positive sigma2 at draw " + std::to_string(i));
    }
    for (Eigen::Index j = 0; j < lambda.cols(); ++j) {
      if (!(lambda(i, j) > 0.0) || !std::isfinite(lambda(i, j))) {
        throw ValidationError("non-positive lambda at draw " + std::to_string(i));
      }
    }
    if ((eta.row(i).array() < 0.0).any() || std::abs(eta.row(i).sum() - 1.0) > 1e-12) {
      throw ValidationError("eta leaves the simplex at draw " + std::to_string(i));
    }
    if (!beta.row(i).allFinite()) throw ValidationError("non-finite beta at draw " + std::to_string(i));
  }
}

namespace {

std::string chain_csv(const PosteriorDraws& d) {
  std::string out;
  for (Eigen::Index j = 0; j < d.p(); ++j) out += "beta_" + std::to_string(j + 1) + ",";
  if (d.has_intercept()) out += "intercept,";
  out += "sigma2";
  for (Eigen::Index j = 0; j < d.p(); ++j) out += ",lambda_" + std::to_string(j + 1);
  for (Eigen::Index k = 0; k < d.eta.cols(); ++k) out += ",eta_" + std::to_string(k + 1);
  out += '\n';
  for (Eigen::Index i = 0; i < d.n_draws(); ++i) {
    for (Eigen::Index j = 0; j < d.p(); ++j) out += format_real(d.beta(i, j)) + ",";
    if (d.has_intercept()) out += format_real(d.intercept[i]) + ",";
    out += format_real(d.sigma2[i]);
    for (Eigen::Index j = 0; j < d.p(); ++j) out += "," + format_real(d.lambda(i, j));
    for (Eigen::Index k = 0; k < d.eta.cols(); ++k) out += "," + format_real(d.eta(i, k));
    out += '\n';
  }
  return out;
}

}  // namespace

void save_draws(const std::vector<PosteriorDraws>& chains, const fs::path& dir) {
  if (chains.empty()) throw ValidationError("no chains to save");
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "trader-draws/1";
  manifest["tau"] = chains.front().tau;
  manifest["config_digest"] = chains.front().config_digest;
  manifest["chains"] = json::array();
  for (const auto& d : chains) {
    d.validate();
    const std::string body = chain_csv(d);
    const std::string file = "chain_" + std::to_string(d.chain_id) + ".csv";
    write_file(dir / file, body);
    manifest["chains"].push_back({{"file", file},
                                  {"chain_id", d.chain_id},
                                  {"seed", d.seed},
                                  {"tau", d.tau},
                                  {"config_digest", d.config_digest},
                                  {"rows", d.n_draws()},
                                  {"p", d.p()},
                                  {"k_plus_one", d.eta.cols()},
                                  {"has_intercept", d.has_intercept()},
                                  {"checksum", hex_digest(body)}});
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

void save_draws(const PosteriorDraws& draws, const fs::path& dir) { save_draws(std::vector{draws}, dir); }

LoadedDraws load_draws(const fs::path& dir, const std::optional<std::string>& expected_digest) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("unreadable draw manifest: ") + e.what());
  }
  LoadedDraws out;
  try {
    for (const auto& entry : manifest.at("chains")) {
      const std::string file = entry.at("file").get<std::string>();
      const std::string body = read_file(dir / file);
      if (hex_digest(body) != entry.at("checksum").get<std::string>()) {
        throw CorruptionError("checksum mismatch in " + file);
      }
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto p = entry.at("p").get<Eigen::Index>();
      const auto kp1 = entry.at("k_plus_one").get<Eigen::Index>();
      const bool has_int = entry.at("has_intercept").get<bool>();
      auto lines = lines_of(body);
      while (!lines.empty() && lines.back().empty()) lines.pop_back();
      if (static_cast<Eigen::Index>(lines.size()) != rows + 1) throw CorruptionError("row count mismatch in " + file);
      const std::size_t width = static_cast<std::size_t>(2 * p + kp1 + 1 + (has_int ? 1 : 0));

      PosteriorDraws d;
      d.beta.resize(rows, p);
      d.lambda.resize(rows, p);
      d.eta.resize(rows, kp1);
      d.sigma2.resize(rows);
      if (has_int) d.intercept.resize(rows);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const auto fields = split(lines[static_cast<std::size_t>(i + 1)], ',');
        if (fields.size() != width) throw CorruptionError("ragged row in " + file);
        std::vector<double> v(width);
        for (std::size_t c = 0; c < width; ++c) {
          const auto r = parse_real(fields[c]);
          if (!r) throw CorruptionError("malformed number in " + file);
          v[c] = *r;
        }
        std::size_t c = 0;
        for (Eigen::Index j = 0; j < p; ++j) d.beta(i, j) = v[c++];
        if (has_int) d.intercept[i] = v[c++];
        d.sigma2[i] = v[c++];
        for (Eigen::Index j = 0; j < p; ++j) d.lambda(i, j) = v[c++];
        for (Eigen::Index k = 0; k < kp1; ++k) d.eta(i, k) = v[c++];
      }
      d.tau = entry.at("tau").get<double>();
      d.chain_id = entry.at("chain_id").get<int>();
      d.seed = entry.at("seed").get<std::uint64_t>();
      d.config_digest = entry.at("config_digest").get<std::string>();
      if (expected_digest && d.config_digest != *expected_digest) out.digest_mismatch = true;
      out.chains.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("malformed draw manifest: ") + e.what());
  }
  return out;
}

Eigen::VectorXd PosteriorSummary::means() const {
  Eigen::VectorXd m(static_cast<Eigen::Index>(coef.size()));
  for (std::size_t j = 0; j < coef.size(); ++j) m[static_cast<Eigen::Index>(j)] = coef[j].mean;
  return m;
}

}  // namespace trader
