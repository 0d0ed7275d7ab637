#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ncmac/metrics.hpp"
#include "ncmac/model.hpp"
#include "ncmac/simulator.hpp"

namespace ncmac {

constexpr int kSchemaVersion = 1;

struct ConstellationMetadata {
  std::string criterion;
  std::optional<double> snr_db;
  std::optional<std::uint64_t> seed;
};

nlohmann::json constellation_to_json(const JointConstellation& c, const ConstellationMetadata& meta = {});
// Throws SchemaError (with a JSON pointer) for structural problems and
// InvalidInput for violated constellation invariants.
JointConstellation constellation_from_json(const nlohmann::json& j, ConstellationMetadata* meta = nullptr);

void save_constellation(const std::string& path, const JointConstellation& c, const ConstellationMetadata& meta = {});
JointConstellation load_constellation(const std::string& path, ConstellationMetadata* meta = nullptr);

// shortest text that reads back as the same double
std::string format_double(double v);

// id,kind,param,value,argpair
void write_metrics_csv(std::ostream& os, const std::string& id, const std::vector<MetricReport>& reports);
// snr_db,trials,errors,ser,stderr
void write_sim_csv(std::ostream& os, const SimResult& result);
// iter,objective,gradnorm,step
void write_trace_header(std::ostream& os);
void write_trace_row(std::ostream& os, int iter, double objective, double grad_norm, double step);

}  // namespace ncmac
