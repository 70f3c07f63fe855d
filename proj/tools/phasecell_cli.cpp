#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "phasecell/runner.hpp"

namespace fs = std::filesystem;
using namespace phasecell;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string format;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
}

int fail(const std::string& out_dir, int code, const std::string& kind, const std::string& msg) {
  const auto j = error_json(kind, msg);
  std::cerr << j.dump() << "\n";
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!ec) {
      std::ofstream f(fs::path(out_dir) / "error.json", std::ios::binary | std::ios::trunc);
      f << j.dump(2) << "\n";
    }
  }
  return code;
}

int execute(const std::string& verb, const Options& o) {
  std::string out_dir = o.out;
  try {
    json j = o.config.empty() ? json{{"experiment", verb}} : json::parse(read_file(o.config), nullptr, false);
    if (j.is_discarded()) throw ValidationError("config '" + o.config + "' is not valid JSON");
    if (!j.is_object()) throw ValidationError("scenario must be a JSON object");
    if (!j.contains("experiment")) j["experiment"] = verb;
    auto s = parse_scenario(j);
    if (s.experiment != verb)
      throw ValidationError("config describes experiment '" + s.experiment + "' but verb is '" + verb + "'");
    if (!o.out.empty()) s.out_dir = o.out;
    if (!o.format.empty()) s.format = o.format;
    if (o.seed_set) s.seed = o.seed;
    out_dir = s.out_dir;
    const auto r = run(s);
    fs::create_directories(s.out_dir);
    for (const auto& [name, data] : r.files) write_file(fs::path(s.out_dir) / name, data);
    std::cout << r.summary.dump() << "\n";
    return r.exit_code;
  } catch (const Error& e) {
    return fail(out_dir, exit_code_for(e), e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail(out_dir, kExitValidation, "Error", e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-space cell projectors: experiments and reports"};
  app.require_subcommand(1);
  Options o;
  std::string verb;
  for (const auto& name : experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", o.config, "scenario JSON file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", o.seed, "seed for randomized test states");
    sub->callback([&verb, name] { verb = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }
  for (auto* sub : app.get_subcommands())
    if (sub->count("--seed") > 0) o.seed_set = true;
  return execute(verb, o);
}
