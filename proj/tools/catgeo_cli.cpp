#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "catgeo/io.hpp"
#include "catgeo/parallel.hpp"
#include "catgeo/scenarios.hpp"

using catgeo::Json;

int main(int argc, char** argv) {
  CLI::App app{"catgeo: information geometry of category learning"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  long long seed_override = -1;
  int threads = 1;

  for (const std::string& name : catgeo::scenario_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " scenario");
    sub->add_option("--config", config_path, "scenario config JSON file");
    sub->add_option("--seed", seed_override, "override the config seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads (must not change results)");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string name = app.get_subcommands().front()->get_name();

  Json config;
  try {
    config = config_path.empty()
                 ? catgeo::default_scenario_config(name)
                 : Json::parse(catgeo::read_text_file(config_path));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "{\"error\":\"ConfigError\",\"message\":\"%s\"}\n", e.what());
    return 2;
  }
  if (seed_override >= 0) config["seed"] = static_cast<uint64_t>(seed_override);
  catgeo::set_num_threads(threads);

  try {
    catgeo::ScenarioResult res = catgeo::run_scenario(name, config, out_dir);
    if (res.exit_code != 0) {
      std::string err = catgeo::read_text_file(out_dir + "/error.json");
      std::fputs(err.c_str(), stderr);
    } else {
      std::printf("%s\n", res.metrics.dump(2).c_str());
    }
    return res.exit_code;
  } catch (const catgeo::Error& e) {
    std::fprintf(stderr, "{\"error\":\"%s\",\"message\":\"%s\"}\n", e.code().c_str(),
                 e.what());
    return e.code() == "ConfigError" || e.code() == "IoError" ? 2 : 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "{\"error\":\"Internal\",\"message\":\"%s\"}\n", e.what());
    return 3;
  }
}
