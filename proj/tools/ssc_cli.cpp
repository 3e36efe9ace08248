// ssc: command-line front end.
//
//   ssc run --polygons P.geojson --events E.geojson [--out-dir DIR] ...
//   ssc validate --polygons P.geojson --events E.geojson
//   ssc synth --out-dir DIR [--communities N] ...
//
// Exit status: 0 success, 1 validation failure, 2 runtime or stage failure.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ssc/ssc.hpp"

namespace {

void print_report(const ssc::Dataset& ds, const ssc::ValidationReport& report) {
  for (const auto& v : report.violations) {
    std::cerr << ssc::to_string(v.kind) << " community=" << v.community_id;
    if (!v.event_id.empty()) std::cerr << " event=" << v.event_id;
    std::cerr << ": " << v.detail << "\n";
  }
  for (const auto& o : ds.orphans) {
    std::cerr << "orphan_event feature=" << o.feature_index << " event=" << o.event_id
              << " community=" << o.community_id << "\n";
  }
  std::cout << report.communities.size() << " communities, " << report.included_count() << " included, "
            << report.violations.size() << " violations, " << ds.orphans.size() << " orphan events\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Socio-spatial contagion analysis of spatio-temporal adoption events"};
  app.require_subcommand(1);

  std::string polygons, events;
  ssc::PipelineConfig cfg;
  std::string mode = "period";
  bool no_curves = false;

  auto* run = app.add_subcommand("run", "Run the full analysis and write all tables");
  run->add_option("--polygons", polygons, "Community polygons (GeoJSON FeatureCollection)")->required();
  run->add_option("--events", events, "Adoption events (GeoJSON FeatureCollection)")->required();
  run->add_option("--seed", cfg.seed, "Master seed of the null-model simulations")->envname("SSC_SEED");
  run->add_option("--sims", cfg.n_sims, "Null-model simulations per year pair")->capture_default_str();
  run->add_option("--grid-step", cfg.grid_step, "Distance grid step in meters")->capture_default_str();
  run->add_option("--threshold-mode", mode, "Pattern cuts for transitions")
      ->check(CLI::IsMember({"global", "period"}))
      ->capture_default_str();
  run->add_option("--jobs", cfg.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--out-dir", cfg.out_dir, "Output directory")->capture_default_str();
  run->add_flag("--no-curves", no_curves, "Skip the per-pair curve files");

  auto* validate = app.add_subcommand("validate", "Check the input files and report violations");
  validate->add_option("--polygons", polygons)->required();
  validate->add_option("--events", events)->required();

  std::filesystem::path synth_dir = "synth";
  ssc::RegionConfig region;
  auto* synth = app.add_subcommand("synth", "Write a synthetic contagion region as GeoJSON");
  synth->add_option("--out-dir", synth_dir)->capture_default_str();
  synth->add_option("--communities", region.n_communities)->capture_default_str();
  synth->add_option("--min-events", region.min_events)->capture_default_str();
  synth->add_option("--max-events", region.max_events)->capture_default_str();
  synth->add_option("--p-min", region.min_p, "Lowest contagion probability")->capture_default_str();
  synth->add_option("--p-max", region.max_p, "Highest contagion probability")->capture_default_str();
  synth->add_option("--kernel", region.kernel_range, "Contagion displacement scale (m)")->capture_default_str();
  synth->add_option("--seed", region.seed)->envname("SSC_SEED");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto comms = ssc::generate_region(region, ssc::Timeline::standard());
      std::vector<ssc::CommunityInput> inputs;
      for (const auto& c : comms) inputs.push_back(ssc::to_input(c));
      ssc::write_json(synth_dir / "polygons.geojson", ssc::polygons_geojson(inputs));
      ssc::write_json(synth_dir / "events.geojson", ssc::events_geojson(inputs));
      std::size_t n = 0;
      for (const auto& c : comms) n += c.size();
      std::cout << "wrote " << comms.size() << " communities, " << n << " events to " << synth_dir.string() << "\n";
      return 0;
    }

    const auto ds = ssc::read_dataset(polygons, events);
    if (*validate) {
      const auto report = ssc::validate_dataset(ds.communities, ssc::Timeline::standard());
      print_report(ds, report);
      return report.has_hard_errors() || report.included_count() == 0 ? 1 : 0;
    }

    cfg.polygons_source = polygons;
    cfg.events_source = events;
    cfg.mode = mode == "global" ? ssc::ThresholdMode::global : ssc::ThresholdMode::period;
    cfg.write_curves = !no_curves;
    const auto result = ssc::run_pipeline(ds, cfg);
    for (const auto& s : result.stages) {
      std::fprintf(stderr, "%-12s %-8s %8.2fs %s\n", s.name.c_str(), s.status.c_str(), s.seconds, s.message.c_str());
    }
    if (result.exit_code == 1) print_report(ds, result.validation);
    std::cout << "manifest " << result.manifest_hash << "\n";
    return result.exit_code;
  } catch (const ssc::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
