#include "cli.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "ts3ra/engine.hpp"
#include "ts3ra/hopfield.hpp"
#include "ts3ra/scenario.hpp"
#include "ts3ra/slicenet.hpp"

namespace ts3ra::cli {

namespace fs = std::filesystem;

namespace {

/// Problems the user can fix: bad flags, files, scenario values.
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::stderr_logger_mt("ts3ra");
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("TS3RA_LOG");
    const std::string level = env ? env : "error";
    if (level == "debug") {
      l->set_level(spdlog::level::debug);
    } else if (level == "info") {
      l->set_level(spdlog::level::info);
    } else {
      l->set_level(spdlog::level::err);
    }
    return l;
  }();
  return log;
}

std::ofstream open_out(const fs::path& p, bool binary = false) {
  std::ofstream f(p, binary ? std::ios::binary | std::ios::out : std::ios::out);
  if (!f) throw UserError("cannot write " + p.string());
  return f;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

std::string sanitize(const std::string& v) {
  std::string out;
  for (char c : v) {
    out += std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ? c : '-';
  }
  return out;
}

struct RunJob {
  Scenario scenario;
  std::string suffix;  // appended to every artifact name
};

void execute(const RunJob& job, const fs::path& out_dir, bool with_trace) {
  auto name = [&](const std::string& stem, const std::string& ext) {
    return out_dir / (stem + job.suffix + ext);
  };
  slicenet::SliceNet model = [&] {
    try {
      return engine::prepare_model(job.scenario);
    } catch (const std::runtime_error& e) {
      throw UserError(e.what());
    }
  }();
  {
    auto f = open_out(name("slicenet", ".bin"), true);
    model.save(f);
    auto h = open_out(name("hopfield", ".bin"), true);
    hopfield::HopfieldNet::trained().save(h);
  }
  engine::RunOptions opt;
  opt.model = std::move(model);
  std::ofstream detection = open_out(name("detection", ".csv"));
  std::ofstream migrations = open_out(name("migrations", ".csv"));
  opt.detection = &detection;
  opt.migrations = &migrations;
  std::ofstream trace;
  std::vector<std::unique_ptr<std::ofstream>> sched;
  if (with_trace) {
    trace = open_out(name("trace", ".csv"));
    opt.trace = &trace;
    for (std::int64_t i = 0; i < job.scenario.network.access_points; ++i) {
      sched.push_back(std::make_unique<std::ofstream>(
          open_out(name("sched_trace_ap" + std::to_string(i), ".csv"))));
      opt.scheduler_traces.push_back(sched.back().get());
    }
  }
  logger()->info("run{}: seed {} devices {} duration {} s", job.suffix,
                 job.scenario.network.seed, job.scenario.network.devices,
                 job.scenario.network.duration_s);
  const auto result = engine::run_scenario(job.scenario, std::move(opt));
  auto metrics = open_out(name("metrics", ".csv"));
  engine::write_metrics_csv(metrics, result.metrics);
  const auto& g = result.metrics.global;
  logger()->info(
      "run{}: {} events, {} auth rejections, {} quarantined ({} illegitimate), "
      "{} attack windows, {} migrations",
      job.suffix, g.events, g.auth_rejections, g.quarantined_devices,
      g.quarantined_illegitimate, g.attack_windows, g.migrations);
}

int cmd_run(const std::string& scenario_path, std::optional<std::uint64_t> seed,
            const std::string& out, bool with_trace, const std::string& sweep,
            std::size_t jobs, std::ostream& os) {
  Scenario base;
  try {
    base = load_scenario_file(scenario_path);
    if (seed) base.network.seed = *seed;
  } catch (const std::exception& e) {
    throw UserError(e.what());
  }
  std::vector<RunJob> runs;
  if (sweep.empty()) {
    runs.push_back({base, ""});
  } else {
    const auto eq = sweep.find('=');
    if (eq == std::string::npos) throw UserError("--sweep expects key=v1,v2,...");
    const std::string key = sweep.substr(0, eq);
    const auto values = split(sweep.substr(eq + 1), ',');
    if (values.empty()) throw UserError("--sweep needs at least one value");
    for (const auto& v : values) {
      if (v.empty()) throw UserError("--sweep has an empty value");
      RunJob job{base, "_" + sanitize(key) + sanitize(v)};
      try {
        set_scenario_value(job.scenario, key, v);
      } catch (const std::exception& e) {
        throw UserError(std::string("--sweep: ") + e.what());
      }
      runs.push_back(std::move(job));
    }
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw UserError("cannot create output directory " + out + ": " + ec.message());

  jobs = std::clamp<std::size_t>(jobs, 1, runs.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        execute(runs[i], out, with_trace);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  for (const auto& r : runs) {
    os << (fs::path(out) / ("metrics" + r.suffix + ".csv")).string() << '\n';
  }
  return kOk;
}

int cmd_train(const std::string& data_path, std::size_t epochs, double lr,
              const std::string& out, std::uint64_t seed, std::ostream& os) {
  std::ifstream in(data_path);
  if (!in) throw UserError("cannot open dataset " + data_path);
  std::vector<slicenet::LabeledSample> data;
  try {
    data = slicenet::read_dataset_csv(in);
  } catch (const std::exception& e) {
    throw UserError(data_path + ": " + e.what());
  }
  if (data.empty()) throw UserError(data_path + ": no samples");
  if (!(lr >= 0.001 && lr <= 0.1)) throw UserError("--lr must lie in [0.001, 0.1]");
  Rng rng(seed);
  Rng init = rng.split("init");
  slicenet::SliceNet net(slicenet::SliceNetConfig{}, init);
  Rng train_rng = rng.split("train");
  const auto result = slicenet::train(net, data, {epochs, lr, 16}, train_rng);
  auto f = open_out(out, true);
  net.save(f);
  auto loss = open_out(fs::path(out).replace_extension(".loss.csv"));
  slicenet::write_loss_csv(loss, result);
  slicenet::write_loss_csv(os, result);
  return kOk;
}

int cmd_gen_dataset(std::size_t n, std::uint64_t seed, const std::string& out) {
  Rng rng(seed);
  const auto data = slicenet::synthetic_dataset(n, rng);
  auto f = open_out(out);
  slicenet::write_dataset_csv(f, data);
  return kOk;
}

}  // namespace

Summary summarize_files(const std::vector<std::string>& paths) {
  if (paths.empty()) throw std::runtime_error("summarize needs at least one file");
  Summary s;
  std::vector<std::vector<std::vector<double>>> values;  // row, column, run
  std::string header;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(p + ": empty file");
    if (header.empty()) {
      header = line;
      auto cols = split(line, ',');
      if (cols.size() < 2) throw std::runtime_error(p + ": no metric columns");
      s.columns.assign(cols.begin() + 1, cols.end());
    } else if (line != header) {
      throw std::runtime_error(p + ": column header differs from " + paths.front());
    }
    std::size_t r = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split(line, ',');
      if (cells.size() != s.columns.size() + 1) {
        throw std::runtime_error(p + ": wrong number of cells");
      }
      if (p == paths.front()) {
        s.rows.push_back({cells[0], {}, {}});
        values.emplace_back(s.columns.size());
      } else if (r >= s.rows.size() || s.rows[r].slice != cells[0]) {
        throw std::runtime_error(p + ": row order differs from " + paths.front());
      }
      for (std::size_t c = 0; c < s.columns.size(); ++c) {
        try {
          values[r][c].push_back(std::stod(cells[c + 1]));
        } catch (const std::exception&) {
          throw std::runtime_error(p + ": non-numeric cell '" + cells[c + 1] + "'");
        }
      }
      ++r;
    }
    if (r != s.rows.size()) throw std::runtime_error(p + ": row count differs");
  }
  for (std::size_t r = 0; r < s.rows.size(); ++r) {
    for (const auto& runs : values[r]) {
      double mean = 0.0;
      for (double v : runs) mean += v;
      mean /= static_cast<double>(runs.size());
      double ss = 0.0;
      for (double v : runs) ss += (v - mean) * (v - mean);
      s.rows[r].mean.push_back(mean);
      s.rows[r].stddev.push_back(
          runs.size() > 1 ? std::sqrt(ss / static_cast<double>(runs.size() - 1)) : 0.0);
    }
  }
  return s;
}

void write_summary(std::ostream& os, const Summary& s) {
  os << "slice";
  for (const auto& c : s.columns) os << ',' << c << "_mean," << c << "_std";
  os << '\n';
  for (const auto& r : s.rows) {
    os << r.slice;
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
      char buf[64];
      std::snprintf(buf, sizeof buf, ",%.6g,%.6g", r.mean[c], r.stddev[c]);
      os << buf;
    }
    os << '\n';
  }
}

int main_with(const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err) {
  CLI::App app{"T-S3RA 5G slicing simulator", "ts3ra"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario");
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "results";
  bool with_trace = false;
  std::string sweep;
  std::size_t jobs = 1;
  run->add_option("--scenario", scenario_path, "Scenario file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--trace", with_trace, "Write event and scheduler traces");
  run->add_option("--sweep", sweep, "key=v1,v2,... one run per value");
  run->add_option("--jobs", jobs, "Runs executed in parallel")->check(CLI::PositiveNumber);

  auto* summarize = app.add_subcommand("summarize", "Mean and stddev over metric files");
  std::vector<std::string> files;
  summarize->add_option("files", files, "Metric CSV files")->required();

  auto* train = app.add_subcommand("train-slicenet", "Train a slice selector");
  std::string data_path;
  std::size_t epochs = 10;
  double lr = 0.01;
  std::string model_out;
  std::uint64_t train_seed = 1;
  train->add_option("--data", data_path, "Labelled dataset CSV")->required();
  train->add_option("--epochs", epochs, "Training epochs");
  train->add_option("--lr", lr, "Adam learning rate");
  train->add_option("--out", model_out, "Model file")->required();
  train->add_option("--seed", train_seed, "Initialisation and shuffling seed");

  auto* gen = app.add_subcommand("gen-dataset", "Write a synthetic labelled dataset");
  std::size_t samples = 1000;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--samples", samples, "Number of rows");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output CSV")->required();

  std::vector<std::string> argv_store{"ts3ra"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUserError;
  }

  try {
    if (*run) return cmd_run(scenario_path, seed, out_dir, with_trace, sweep, jobs, out);
    if (*summarize) {
      try {
        write_summary(out, summarize_files(files));
      } catch (const std::runtime_error& e) {
        throw UserError(e.what());
      }
      return kOk;
    }
    if (*train) return cmd_train(data_path, epochs, lr, model_out, train_seed, out);
    if (*gen) return cmd_gen_dataset(samples, gen_seed, gen_out);
  } catch (const UserError& e) {
    err << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  } catch (...) {
    err << "internal error: unknown exception\n";
    return kInternalError;
  }
  return kUserError;
}

}  // namespace ts3ra::cli
