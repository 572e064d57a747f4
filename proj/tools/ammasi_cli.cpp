// Batch CLI for the AMMASI house-price toolkit. Stages communicate through
// CSV/GeoJSON artifacts in --out-dir, so the usual flow is
//   synth -> extract-poi -> build-areal -> build-knn -> train -> evaluate
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ammasi/errors.hpp"
#include "ammasi/format.hpp"
#include "ammasi/pipeline.hpp"

namespace {

using ammasi::pipeline::RunConfig;

struct GlobalFlags {
  std::string config_path;
  std::string region;
  std::string location_mode;
  std::string mask_direction;
  std::string use_poi;  // "on"/"off"
  std::string houses, pois, roads, out_dir;
  double beta = -1.0;
  long long seed = -1;
};

void add_global_flags(CLI::App* cmd, GlobalFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON run configuration");
  cmd->add_option("--seed", flags.seed, "master seed (overrides config)");
  cmd->add_option("--region", flags.region, "region preset: fc|kc|sp|poa|custom");
  cmd->add_option("--location-mode", flags.location_mode,
                  "none|latlon|sinusoidal|node2vec");
  cmd->add_option("--use-poi", flags.use_poi, "on|off");
  cmd->add_option("--mask-direction", flags.mask_direction, "below|above");
  cmd->add_option("--houses", flags.houses, "houses CSV path");
  cmd->add_option("--pois", flags.pois, "POI GeoJSON path");
  cmd->add_option("--roads", flags.roads, "road GeoJSON path");
  cmd->add_option("--out-dir", flags.out_dir, "artifact directory");
  cmd->add_option("--beta", flags.beta, "Gaussian proximity scale");
}

RunConfig resolve_config(const GlobalFlags& flags) {
  RunConfig cfg;
  if (!flags.config_path.empty())
    cfg = ammasi::pipeline::load_run_config(flags.config_path);
  if (!flags.region.empty()) ammasi::pipeline::apply_region_preset(cfg, flags.region);
  if (!flags.location_mode.empty())
    cfg.model.location_mode = ammasi::model::location_mode_from_string(flags.location_mode);
  if (!flags.mask_direction.empty())
    cfg.model.mask_direction =
        ammasi::model::mask_direction_from_string(flags.mask_direction);
  if (!flags.use_poi.empty()) {
    if (flags.use_poi == "on") cfg.model.use_poi = true;
    else if (flags.use_poi == "off") cfg.model.use_poi = false;
    else throw ammasi::ConfigError("--use-poi expects on or off");
  }
  if (flags.seed >= 0) {
    cfg.model.seed = static_cast<std::uint64_t>(flags.seed);
    cfg.synth.seed = cfg.model.seed;
  }
  if (!flags.houses.empty()) cfg.houses_path = flags.houses;
  if (!flags.pois.empty()) cfg.pois_path = flags.pois;
  if (!flags.roads.empty()) cfg.roads_path = flags.roads;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.beta > 0.0) cfg.beta = flags.beta;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AMMASI geospatial feature and appraisal-model pipeline"};
  app.require_subcommand(1);

  GlobalFlags flags;
  std::string eval_split = "val";
  ammasi::pipeline::SigmaSweepArgs sweep_args;
  int synth_houses = -1;
  double synth_poi = -1.0, synth_areal = -1.0, synth_neighbor = -1.0;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic fixture");
  add_global_flags(synth, flags);
  synth->add_option("--n-houses", synth_houses, "number of houses (>= 50)");
  synth->add_option("--poi-signal", synth_poi, "planted POI signal std");
  synth->add_option("--areal-signal", synth_areal, "planted areal signal std");
  synth->add_option("--neighbor-signal", synth_neighbor, "planted neighbor signal std");

  for (const char* name : {"extract-poi", "beta-sweep", "poi-coefficients",
                           "build-areal", "build-knn", "train"})
    add_global_flags(app.add_subcommand(name, name), flags);

  CLI::App* evaluate = app.add_subcommand("evaluate", "metrics on a split");
  add_global_flags(evaluate, flags);
  evaluate->add_option("--split", eval_split, "train|val");

  CLI::App* sweep = app.add_subcommand("sigma-sweep", "sigma and ablation study");
  add_global_flags(sweep, flags);
  sweep->add_option("--sigma-g", sweep_args.sigma_g_values,
                    "sigma_G values (default: the published study grid)");
  sweep->add_option("--sigma-s", sweep_args.sigma_s_values,
                    "sigma_S values (default: the configured sigma_s)");
  sweep->add_option("--cells", sweep_args.cells,
                    "ablation cells like A,P or -,- (default: all eight)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = resolve_config(flags);

    if (synth->parsed()) {
      if (synth_houses >= 0) cfg.synth.n_houses = synth_houses;
      if (synth_poi >= 0.0) cfg.synth.poi_signal = synth_poi;
      if (synth_areal >= 0.0) cfg.synth.areal_signal = synth_areal;
      if (synth_neighbor >= 0.0) cfg.synth.neighbor_signal = synth_neighbor;
      ammasi::pipeline::run_synth(cfg);
      std::cout << "fixture written under " << cfg.out_dir << "\n";
    } else if (app.got_subcommand("extract-poi")) {
      ammasi::pipeline::run_extract_poi(cfg);
      std::cout << "proximity features written\n";
    } else if (app.got_subcommand("beta-sweep")) {
      const auto result = ammasi::pipeline::run_beta_sweep(cfg);
      std::cout << "best beta: " << ammasi::fmt_g17(result.best_beta) << "\n";
    } else if (app.got_subcommand("poi-coefficients")) {
      ammasi::pipeline::run_poi_coefficients(cfg);
      std::cout << "coefficients written\n";
    } else if (app.got_subcommand("build-areal")) {
      ammasi::pipeline::run_build_areal(cfg);
      std::cout << "areal embedding written\n";
    } else if (app.got_subcommand("build-knn")) {
      ammasi::pipeline::run_build_knn(cfg);
      std::cout << "reference sets written\n";
    } else if (app.got_subcommand("train")) {
      const auto result = ammasi::pipeline::run_train(cfg);
      std::cout << "best epoch " << result.best_epoch << ", val MALE "
                << ammasi::fmt_g17(result.best_val_male) << "\n";
    } else if (evaluate->parsed()) {
      const auto m = ammasi::pipeline::run_evaluate(cfg, eval_split);
      std::cout << "MALE " << ammasi::fmt_g17(m.male) << "  RMSE "
                << ammasi::fmt_g17(m.rmse) << "  MdAPE " << ammasi::fmt_g17(m.mdape)
                << "\n";
    } else if (sweep->parsed()) {
      const auto cells = ammasi::pipeline::run_sigma_sweep(cfg, sweep_args);
      std::cout << cells.size() << " sweep cells written\n";
    }
  } catch (const ammasi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ammasi::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
