#include "ncmac/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "ncmac/errors.hpp"

namespace ncmac {

using nlohmann::json;

json constellation_to_json(const JointConstellation& c, const ConstellationMetadata& meta) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["T"] = c.config.T;
  j["K"] = c.config.K;
  j["M"] = c.config.M;
  json powers = json::array(), bits = json::array(), users = json::array();
  for (const auto& u : c.users) {
    powers.push_back(u.power);
    bits.push_back(u.bits);
    json syms = json::array();
    for (const auto& x : u.symbols) {
      json rows = json::array();
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index col = 0; col < x.cols(); ++col) row.push_back({x(r, col).real(), x(r, col).imag()});
        rows.push_back(row);
      }
      syms.push_back(rows);
    }
    users.push_back(syms);
  }
  j["powers"] = powers;
  j["bits"] = bits;
  j["users"] = users;
  json m = json::object();
  if (!meta.criterion.empty()) m["criterion"] = meta.criterion;
  if (meta.snr_db) m["snr_db"] = *meta.snr_db;
  if (meta.seed) m["seed"] = *meta.seed;
  if (!m.empty()) j["metadata"] = m;
  return j;
}

namespace {

const json& field(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) throw SchemaError(ptr.empty() ? "/" : ptr, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(ptr + "/" + key, "missing field");
  return *it;
}

int get_int(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) throw SchemaError(ptr, "expected an integer");
  return j.get<int>();
}

double get_number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw SchemaError(ptr, "expected a number");
  return j.get<double>();
}

const json& get_array(const json& j, const std::string& ptr, std::size_t size = static_cast<std::size_t>(-1)) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array");
  if (size != static_cast<std::size_t>(-1) && j.size() != size)
    throw SchemaError(ptr, "expected " + std::to_string(size) + " entries");
  return j;
}

}  // namespace

JointConstellation constellation_from_json(const json& j, ConstellationMetadata* meta) {
  const int version = get_int(field(j, "schema_version", ""), "/schema_version");
  if (version != kSchemaVersion) throw SchemaError("/schema_version", "unsupported schema version " + std::to_string(version));
  JointConstellation c;
  c.config.T = get_int(field(j, "T", ""), "/T");
  c.config.K = get_int(field(j, "K", ""), "/K");
  if (c.config.T < 1) throw SchemaError("/T", "must be positive");
  if (c.config.K < 1) throw SchemaError("/K", "must be positive");
  const std::size_t K = static_cast<std::size_t>(c.config.K);
  const json& M = get_array(field(j, "M", ""), "/M", K);
  const json& powers = get_array(field(j, "powers", ""), "/powers", K);
  const json& bits = get_array(field(j, "bits", ""), "/bits", K);
  const json& users = get_array(field(j, "users", ""), "/users", K);
  c.config.M.clear();
  for (std::size_t k = 0; k < K; ++k) {
    const std::string pk = "/" + std::to_string(k);
    c.config.M.push_back(get_int(M[k], "/M" + pk));
    if (c.config.M.back() < 1) throw SchemaError("/M" + pk, "must be positive");
    UserConstellation u;
    u.power = get_number(powers[k], "/powers" + pk);
    u.bits = get_int(bits[k], "/bits" + pk);
    const json& syms = get_array(users[k], "/users" + pk);
    for (std::size_t n = 0; n < syms.size(); ++n) {
      const std::string ps = "/users" + pk + "/" + std::to_string(n);
      const json& rows = get_array(syms[n], ps, static_cast<std::size_t>(c.config.T));
      CMatrix x(c.config.T, c.config.M[k]);
      for (int r = 0; r < c.config.T; ++r) {
        const std::string pr = ps + "/" + std::to_string(r);
        const json& row = get_array(rows[r], pr, static_cast<std::size_t>(c.config.M[k]));
        for (int col = 0; col < c.config.M[k]; ++col) {
          const std::string pe = pr + "/" + std::to_string(col);
          const json& e = get_array(row[col], pe, 2);
          x(r, col) = cd(get_number(e[0], pe + "/0"), get_number(e[1], pe + "/1"));
        }
      }
      u.symbols.push_back(std::move(x));
    }
    c.users.push_back(std::move(u));
  }
  double pmax = 0.0;
  for (const auto& u : c.users) pmax = std::max(pmax, u.power);
  c.config.P = pmax;
  c.config.N = 1;
  if (meta) {
    *meta = {};
    if (auto it = j.find("metadata"); it != j.end()) {
      if (!it->is_object()) throw SchemaError("/metadata", "expected an object");
      if (auto m = it->find("criterion"); m != it->end()) {
        if (!m->is_string()) throw SchemaError("/metadata/criterion", "expected a string");
        meta->criterion = m->get<std::string>();
      }
      if (auto m = it->find("snr_db"); m != it->end()) meta->snr_db = get_number(*m, "/metadata/snr_db");
      if (auto m = it->find("seed"); m != it->end()) {
        if (!m->is_number_unsigned()) throw SchemaError("/metadata/seed", "expected a non-negative integer");
        meta->seed = m->get<std::uint64_t>();
      }
    }
  }
  c.validate();
  return c;
}

void save_constellation(const std::string& path, const JointConstellation& c, const ConstellationMetadata& meta) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << constellation_to_json(c, meta).dump(1) << '\n';
  if (!f) throw Error("failed writing '" + path + "'");
}

JointConstellation load_constellation(const std::string& path, ConstellationMetadata* meta) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("malformed JSON: ") + e.what());
  }
  return constellation_from_json(j, meta);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_metrics_csv(std::ostream& os, const std::string& id, const std::vector<MetricReport>& reports) {
  os << "id,kind,param,value,argpair\n";
  for (const auto& r : reports)
    os << id << ',' << r.kind.name() << ',' << r.kind.param() << ',' << format_double(r.value) << ',' << r.arg_i << '-'
       << r.arg_j << '\n';
}

void write_sim_csv(std::ostream& os, const SimResult& result) {
  os << "snr_db,trials,errors,ser,stderr\n";
  for (const auto& p : result.points)
    os << format_double(p.snr_db) << ',' << p.trials << ',' << p.errors << ',' << format_double(p.ser) << ','
       << format_double(p.std_error) << '\n';
}

void write_trace_header(std::ostream& os) { os << "iter,objective,gradnorm,step\n"; }

void write_trace_row(std::ostream& os, int iter, double objective, double grad_norm, double step) {
  os << iter << ',' << format_double(objective) << ',' << format_double(grad_norm) << ',' << format_double(step) << '\n';
}

}  // namespace ncmac
