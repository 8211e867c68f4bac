// SPDX-License-Identifier: Apache-2.0
#include "csidn/evaluate.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>

namespace csidn {

namespace {

std::string format_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

std::string snr_field(const std::optional<double>& snr) {
  return snr.has_value() ? format_double("%.10g", *snr) : "inf";
}

double snr_sort_key(const std::optional<double>& snr) {
  return snr.has_value() ? *snr : std::numeric_limits<double>::infinity();
}

}  // namespace

MetricsReport evaluate_bundle(ModelBundle<float>& bundle, const CsiDataset& test,
                              const SweepOptions& options, const ChannelConfig* regen_cfg,
                              std::size_t sample_index_offset) {
  if (!(options.parts_available & kPartEncoder) || !(options.parts_available & kPartDecoder)) {
    throw ConfigError("evaluate: bundle is missing encoder/decoder parameters");
  }
  if ((options.use_dnnet || options.noise_free_uses_dnnet) &&
      !(options.parts_available & kPartDnnet)) {
    throw ConfigError("evaluate: denoiser requested but the bundle has no denoiser parameters "
                      "(use --no-dnnet or load a full checkpoint)");
  }
  if (bundle.ae_spec.n_p != test.header.n_p || bundle.ae_spec.n_t != test.header.n_t) {
    throw DimensionError("evaluate: bundle geometry " + std::to_string(bundle.ae_spec.n_p) + "x" +
                         std::to_string(bundle.ae_spec.n_t) + " vs dataset " +
                         std::to_string(test.header.n_p) + "x" + std::to_string(test.header.n_t));
  }

  const DftPair dft = DftPair::for_dims(test.header.n_c, test.header.n_t);
  const ReferenceSet refs =
      ReferenceSet::build(test, dft, options.reference, regen_cfg, sample_index_offset);
  MetricsReport report;
  std::size_t record_index = 0;

  auto run_pass = [&](std::optional<double> snr_db, bool use_dnnet) {
    EvalSettings settings;
    settings.snr_db = snr_db;
    settings.use_dnnet = use_dnnet;
    settings.noise_seed = seed_mix(options.eval_seed, seed_tag("eval-noise"), record_index);
    settings.batch_size = options.batch_size;
    const EvalResult r = evaluate_reconstruction(bundle, test, settings, dft, options.reference,
                                                 regen_cfg, sample_index_offset, &refs);
    MetricsRecord rec;
    rec.gamma = bundle.ae_spec.gamma();
    rec.snr_db = snr_db;
    rec.nmse_db = r.nmse_db;
    rec.rho = r.rho;
    rec.samples = r.samples;
    rec.reference_mode = reference_mode_name(options.reference);
    rec.checkpoint_id = options.checkpoint_id;
    rec.seed = options.eval_seed;
    report.records.push_back(rec);
    ++record_index;
  };

  for (double snr : options.snr_list) run_pass(snr, options.use_dnnet);
  if (options.include_noise_free) run_pass(std::nullopt, options.noise_free_uses_dnnet);
  sort_report(report);
  return report;
}

void sort_report(MetricsReport& report) {
  std::stable_sort(report.records.begin(), report.records.end(),
                   [](const MetricsRecord& a, const MetricsRecord& b) {
                     if (a.gamma != b.gamma) return a.gamma < b.gamma;
                     return snr_sort_key(a.snr_db) < snr_sort_key(b.snr_db);
                   });
}

void emit_report_rows(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);  // binary: byte-stable newlines
  if (!os) throw IoError("cannot open report for writing: " + path.string());
  os << "gamma,snr_db,nmse_db,rho,samples,reference_mode,checkpoint,seed\n";
  for (const MetricsRecord& r : report.records) {
    os << format_double("%.10g", r.gamma) << ',' << snr_field(r.snr_db) << ','
       << format_double("%.6f", r.nmse_db) << ',' << format_double("%.6f", r.rho) << ','
       << r.samples << ',' << r.reference_mode << ',' << r.checkpoint_id << ',' << r.seed << '\n';
  }
  if (!os) throw IoError("write failed for report: " + path.string());
}

void emit_report_curves(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open curve file for writing: " + path.string());

  // Distinct gammas in sorted order.
  std::vector<double> gammas;
  for (const MetricsRecord& r : report.records) {
    if (gammas.empty() || gammas.back() != r.gamma) gammas.push_back(r.gamma);
  }

  const struct {
    const char* name;
    double MetricsRecord::*field;
  } metrics[] = {{"nmse_db", &MetricsRecord::nmse_db}, {"rho", &MetricsRecord::rho}};

  bool first_block = true;
  for (double gamma : gammas) {
    for (const auto& metric : metrics) {
      if (!first_block) os << '\n';
      first_block = false;
      os << "# curve gamma=" << format_double("%.10g", gamma) << " metric=" << metric.name;
      for (const MetricsRecord& r : report.records) {
        if (r.gamma == gamma) {
          os << " reference=" << r.reference_mode << " checkpoint=" << r.checkpoint_id
             << " seed=" << r.seed;
          break;
        }
      }
      os << '\n';
      for (const MetricsRecord& r : report.records) {
        if (r.gamma != gamma) continue;
        os << snr_field(r.snr_db) << ' ' << format_double("%.6f", r.*(metric.field)) << '\n';
      }
    }
  }
  if (!os) throw IoError("write failed for curve file: " + path.string());
}

}  // namespace csidn
