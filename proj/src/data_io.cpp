#include "tvmix/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include <nlohmann/json.hpp>

#include "tvmix/errors.hpp"

namespace tvmix {

namespace {

constexpr int kModelSchemaVersion = 1;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token, std::size_t line_no) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw DataError("CSV parse error at line " + std::to_string(line_no) +
                    ": non-numeric cell '" + token + "'");
  return v;
}

std::vector<std::string> split_comma(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp + "' for writing");
    out << content;
    if (!out) throw DataError("short write to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename '" + tmp + "' to '" + path + "'");
}

}  // namespace

double GroundTruth::density(const Eigen::VectorXd& x, double t) const {
  if (x.size() != dim) throw InvalidInput("GroundTruth::density: dimension mismatch");
  const double var = variance(t);
  const double norm_const = std::pow(2.0 * M_PI * var, -0.5 * dim);
  double acc = 0.0;
  for (int s = 0; s < component_count(); ++s) {
    const double m = mean_base[s] + mean_slope[s] * t;
    const double sq = (x.array() - m).square().sum();
    acc += weights[s] * norm_const * std::exp(-0.5 * sq / var);
  }
  return acc;
}

Eigen::MatrixXd GroundTruth::sample(double t, int n, SplitMix64& rng) const {
  return sample_mixture(components_at(t), weights, n, rng);
}

ComponentSet GroundTruth::components_at(double t) const {
  const double sd = std::sqrt(variance(t));
  ComponentSet c;
  c.means.resize(component_count(), dim);
  for (int s = 0; s < component_count(); ++s)
    c.means.row(s).setConstant(mean_base[s] + mean_slope[s] * t);
  c.chol.assign(component_count(),
                sd * Eigen::MatrixXd::Identity(dim, dim));
  return c;
}

GroundTruth GroundTruth::scenario(int dim) {
  GroundTruth g;
  g.dim = dim;
  g.mean_base = Eigen::Vector3d(-2.0, 0.0, 5.0);
  g.mean_slope = Eigen::Vector3d(20.0, 16.0, 6.0);
  g.var_base = 1.0;
  g.var_slope = 1.0;
  g.weights = Eigen::Vector3d::Constant(1.0 / 3.0);
  return g;
}

std::pair<PanelDataset, GroundTruth> simulate_scenario(int dim, int n_t,
                                                       int m_points,
                                                       std::uint64_t seed) {
  if (dim < 1) throw InvalidInput("simulate_scenario: dim must be >= 1");
  if (n_t < 1) throw InvalidInput("simulate_scenario: n_t must be >= 1");
  if (m_points < 2) throw InvalidInput("simulate_scenario: need at least 2 grid points");

  const GroundTruth truth = GroundTruth::scenario(dim);
  PanelDataset data;
  data.dim = dim;
  data.subject_id = "sim";
  SplitMix64 rng(seed);
  for (int i = 0; i < m_points; ++i) {
    const double t = static_cast<double>(i) / (m_points - 1);
    data.times.push_back(t);
    data.blocks.push_back(truth.sample(t, n_t, rng));
  }
  data.validate();
  return {std::move(data), truth};
}

CsvLoadResult load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "': empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_comma(line);
  if (header.size() < 3 || header[0] != "subject" || header[1] != "t")
    throw DataError("'" + path + "': header must be subject,t,x1[,x2,...]");
  const int dim = static_cast<int>(header.size()) - 2;
  for (int j = 0; j < dim; ++j)
    if (header[2 + j] != "x" + std::to_string(j + 1))
      throw DataError("'" + path + "': value column " + std::to_string(j + 3) +
                      " must be named x" + std::to_string(j + 1));

  struct SubjectRows {
    // raw time -> rows at that time, insertion ordered within the block
    std::map<double, std::vector<Eigen::VectorXd>> by_time;
    std::size_t row_count = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, SubjectRows> raw;

  CsvLoadResult out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_comma(line);
    if (static_cast<int>(cells.size()) != dim + 2)
      throw DataError("CSV parse error at line " + std::to_string(line_no) +
                      ": expected " + std::to_string(dim + 2) + " cells, got " +
                      std::to_string(cells.size()));
    const std::string& subject = cells[0];
    const double t = parse_double(cells[1], line_no);
    Eigen::VectorXd x(dim);
    for (int j = 0; j < dim; ++j) x[j] = parse_double(cells[2 + j], line_no);

    auto it = raw.find(subject);
    if (it == raw.end()) {
      order.push_back(subject);
      it = raw.emplace(subject, SubjectRows{}).first;
    }
    it->second.by_time[t].push_back(std::move(x));
    ++it->second.row_count;
    ++out.rows_total;
  }

  for (const std::string& subject : order) {
    const SubjectRows& rows = raw.at(subject);
    if (rows.by_time.size() < 2) {
      out.rows_rejected += rows.row_count;
      out.reject_messages.push_back("subject '" + subject +
                                    "': degenerate time axis (single distinct time)");
      continue;
    }
    const double t_min = rows.by_time.begin()->first;
    const double t_max = rows.by_time.rbegin()->first;

    PanelDataset data;
    data.dim = dim;
    data.subject_id = subject;
    for (const auto& [t, block_rows] : rows.by_time) {
      data.times.push_back((t - t_min) / (t_max - t_min));
      Eigen::MatrixXd block(static_cast<Eigen::Index>(block_rows.size()), dim);
      for (std::size_t r = 0; r < block_rows.size(); ++r)
        block.row(static_cast<Eigen::Index>(r)) = block_rows[r].transpose();
      data.blocks.push_back(std::move(block));
    }
    data.validate();
    out.subjects.push_back(std::move(data));
  }
  return out;
}

void write_csv(const std::vector<PanelDataset>& subjects, const std::string& path) {
  if (subjects.empty()) throw InvalidInput("write_csv: no subjects");
  const int dim = subjects.front().dim;
  std::ostringstream body;
  body << "subject,t";
  for (int j = 1; j <= dim; ++j) body << ",x" << j;
  body << "\n";
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const PanelDataset& data = subjects[s];
    data.validate();
    if (data.dim != dim) throw InvalidInput("write_csv: mixed dimensions");
    const std::string id = data.subject_id.value_or("s" + std::to_string(s));
    for (std::size_t i = 0; i < data.block_count(); ++i)
      for (Eigen::Index r = 0; r < data.blocks[i].rows(); ++r) {
        body << id << ',' << format_double(data.times[i]);
        for (int j = 0; j < dim; ++j)
          body << ',' << format_double(data.blocks[i](r, j));
        body << "\n";
      }
  }
  atomic_write(path, body.str());
}

void write_csv(const PanelDataset& data, const std::string& path) {
  write_csv(std::vector<PanelDataset>{data}, path);
}

void save_model(const FittedModel& model, const std::string& path) {
  nlohmann::json doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["k"] = model.components.count();
  doc["dim"] = model.components.dim();

  const int k = model.components.count();
  const int d = model.components.dim();
  nlohmann::json means = nlohmann::json::array();
  nlohmann::json chols = nlohmann::json::array();
  for (int s = 0; s < k; ++s) {
    nlohmann::json mean = nlohmann::json::array();
    for (int j = 0; j < d; ++j) mean.push_back(model.components.means(s, j));
    means.push_back(std::move(mean));
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < d; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < d; ++j) row.push_back(model.components.chol[s](i, j));
      rows.push_back(std::move(row));
    }
    chols.push_back(std::move(rows));
  }
  doc["means"] = std::move(means);
  doc["chol_factors"] = std::move(chols);
  doc["field_layer_sizes"] = model.field.layer_sizes;
  doc["field_params"] =
      std::vector<double>(model.field.params.data(),
                          model.field.params.data() + model.field.params.size());
  doc["alpha0"] = std::vector<double>(model.alpha0.data(),
                                      model.alpha0.data() + model.alpha0.size());
  doc["kernel_sigmas"] = model.kernel_sigmas;
  doc["time_domain"] = model.time_domain;

  atomic_write(path, doc.dump(2) + "\n");
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': not a valid model document (" +
                    std::string(e.what()) + ")");
  }

  try {
    if (!doc.contains("schema_version") ||
        doc["schema_version"].get<int>() != kModelSchemaVersion)
      throw DataError("'" + path + "': unsupported model schema version");

    const int k = doc.at("k").get<int>();
    const int d = doc.at("dim").get<int>();

    FittedModel model;
    model.components.means.resize(k, d);
    model.components.chol.assign(k, Eigen::MatrixXd::Zero(d, d));
    const auto& means = doc.at("means");
    const auto& chols = doc.at("chol_factors");
    for (int s = 0; s < k; ++s) {
      for (int j = 0; j < d; ++j)
        model.components.means(s, j) = means.at(s).at(j).get<double>();
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          model.components.chol[s](i, j) = chols.at(s).at(i).at(j).get<double>();
    }

    model.field.layer_sizes = doc.at("field_layer_sizes").get<std::vector<int>>();
    const auto params = doc.at("field_params").get<std::vector<double>>();
    model.field.params =
        Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size()));
    model.field.validate();

    const auto alpha0 = doc.at("alpha0").get<std::vector<double>>();
    model.alpha0 =
        Eigen::Map<const Eigen::VectorXd>(alpha0.data(), static_cast<Eigen::Index>(alpha0.size()));
    if (model.alpha0.size() != k)
      throw DataError("'" + path + "': alpha0 size mismatch");

    model.kernel_sigmas = doc.at("kernel_sigmas").get<std::vector<double>>();
    const auto domain = doc.at("time_domain").get<std::vector<double>>();
    if (domain.size() != 2) throw DataError("'" + path + "': bad time_domain");
    model.time_domain = {domain[0], domain[1]};
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': malformed model document (" +
                    std::string(e.what()) + ")");
  }
}

PanelDataset bootstrap_resample(const PanelDataset& data, std::uint64_t seed) {
  data.validate();
  PanelDataset out;
  out.dim = data.dim;
  out.times = data.times;
  out.subject_id = data.subject_id;
  out.blocks.reserve(data.block_count());
  SplitMix64 rng(seed);
  for (const auto& block : data.blocks) {
    const Eigen::Index n = block.rows();
    Eigen::MatrixXd resampled(n, data.dim);
    for (Eigen::Index r = 0; r < n; ++r)
      resampled.row(r) =
          block.row(static_cast<Eigen::Index>(rng.next_index(static_cast<std::uint64_t>(n))));
    out.blocks.push_back(std::move(resampled));
  }
  return out;
}

}  // namespace tvmix
