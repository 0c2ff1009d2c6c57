#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qmct/qmct.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_data = 3;
constexpr int exit_numerical = 4;

std::vector<double> parse_list(const std::string& text, const char* what)
{
    std::vector<double> out;
    for (const auto& cell : qmct::split_csv_line(text)) {
        double x = 0.0;
        if (!qmct::parse_double(cell, x)) throw qmct::ConfigError(std::string(what) + ": '" + cell + "' is not a number");
        out.push_back(x);
    }
    return out;
}

void print_matrix(std::ostream& out, const qmct::ContrastMatrix& h, const std::vector<std::string>& labels)
{
    std::size_t width = 0;
    for (const auto& l : labels) width = std::max(width, l.size());
    for (std::size_t l = 0; l < h.rows(); ++l) {
        out << std::left << std::setw(static_cast<int>(width) + 2) << labels[l] << std::right;
        for (double v : h.row(l)) out << std::setw(9) << qmct::format_number(v);
        out << '\n';
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Quantile-based multiple contrast tests"};
    app.require_subcommand(1);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "test quantile contrasts on grouped data from a CSV file");
    qmct::AnalysisConfig acfg;
    std::string family = "dunnett", direction = "two-sided", margin = "0", quantiles = "0.5", effect = "quantiles";
    std::string method = "perm-bonferroni", cov = "kernel", format = "table", reference, contrasts_file;
    analyze->add_option("--input", acfg.input_path, "CSV file with a header row")->required();
    analyze->add_option("--group-col", acfg.group_column, "column holding group labels")->capture_default_str();
    analyze->add_option("--value-col", acfg.value_column, "column holding the response")->capture_default_str();
    analyze->add_option("--family", family, "dunnett, tukey, grandmean or custom")->capture_default_str();
    analyze->add_option("--contrasts", contrasts_file, "JSON file with custom contrast rows");
    analyze->add_option("--reference", reference, "label of the Dunnett reference group");
    analyze->add_option("--direction", direction,
                        "two-sided, noninferiority (H0: h'q <= eps), noninferiority-reversed (H0: h'q >= eps), "
                        "equivalence (H0: |h'q| >= eps)")
        ->capture_default_str();
    analyze->add_option("--margin", margin, "scalar or comma-separated list, one per contrast")->capture_default_str();
    analyze->add_option("--quantiles", quantiles, "comma-separated probabilities")->capture_default_str();
    analyze->add_option("--effect", effect, "quantiles or median-iqr")->capture_default_str();
    analyze->add_option("--method", method, "asymp-bonferroni, perm-bonferroni, asymp-mctp, boot-mctp")
        ->capture_default_str();
    analyze->add_option("--cov", cov, "kernel, bootstrap or interval")->capture_default_str();
    analyze->add_option("--alpha", acfg.alpha, "level")->capture_default_str();
    analyze->add_option("--B", acfg.resamples, "permutation / bootstrap resamples")->capture_default_str();
    analyze->add_option("--mc-samples", acfg.mc_samples, "Gaussian draws for asymp-mctp")->capture_default_str();
    analyze->add_option("--seed", acfg.seed, "random seed")->capture_default_str();
    analyze->add_option("--format", format, "table, csv or json")->capture_default_str();

    // simulate
    auto* simulate = app.add_subcommand(
        "simulate",
        std::string("run a simulation grid from a JSON config\n\n"
                    "Config keys (lists are cross-multiplied): distributions, sigmas, sample_sizes, shifts\n"
                    "(location of the last group), families, effects, directions, margins, cov_kinds, methods;\n"
                    "scalars: alpha, n_sim, B, mc_samples, seed.\n\nCSV columns: ") +
            qmct::study_columns);
    std::string config_path, sim_format = "json", output_path;
    bool paper_scale = false, quiet = false;
    std::size_t threads = 1;
    simulate->add_option("--config", config_path, "JSON config file")->required();
    simulate->add_flag("--paper-scale", paper_scale, "n_sim = 5000 and B = 2000");
    simulate->add_option("--threads", threads, "worker threads")->capture_default_str();
    simulate->add_option("--format", sim_format, "json or csv")->capture_default_str();
    simulate->add_option("--output", output_path, "write results here instead of stdout");
    simulate->add_flag("--quiet", quiet, "no progress on stderr");

    // matrices
    auto* matrices = app.add_subcommand("matrices", "print a contrast matrix");
    std::string mfamily = "tukey", meffect = "none";
    std::size_t k = 4;
    matrices->add_option("--family", mfamily, "dunnett, tukey or grandmean")->capture_default_str();
    matrices->add_option("--k", k, "number of groups")->capture_default_str();
    matrices->add_option("--effect", meffect, "none or median-iqr")->capture_default_str();

    auto* selftest = app.add_subcommand("selftest", "run the numerical reference checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (*analyze) {
            acfg.family.name = family;
            acfg.family.direction = qmct::parse_direction(direction);
            acfg.family.margins = parse_list(margin, "--margin");
            acfg.family.quantiles = parse_list(quantiles, "--quantiles");
            acfg.family.effect = qmct::parse_effect(effect);
            if (family == "custom") {
                if (contrasts_file.empty()) throw qmct::ConfigError("--family custom needs --contrasts");
                acfg.family.custom = qmct::read_custom_contrasts(contrasts_file);
            }
            if (!reference.empty()) {
                if (family != "dunnett") throw qmct::ConfigError("--reference applies to the dunnett family only");
                acfg.reference = reference;
            }
            acfg.method = qmct::parse_method(method);
            acfg.cov_kind = qmct::parse_estimator(cov);
            acfg.format = qmct::parse_format(format);

            std::size_t missing = 0;
            const auto rec = qmct::analyze(acfg, &missing);
            if (missing > 0) std::cerr << "warning: skipped " << missing << " rows with missing cells\n";
            switch (acfg.format) {
            case qmct::OutputFormat::Table: qmct::write_table(std::cout, rec); break;
            case qmct::OutputFormat::Delimited: qmct::write_delimited(std::cout, rec); break;
            case qmct::OutputFormat::Json: std::cout << qmct::to_json(rec).dump(2) << '\n'; break;
            }
        } else if (*simulate) {
            if (sim_format != "json" && sim_format != "csv")
                throw qmct::ConfigError("unknown format '" + sim_format + "' (expected json, csv)");
            auto cfg = qmct::read_study_config(config_path);
            if (paper_scale) {
                cfg.n_sim = 5000;
                cfg.resamples = 2000;
            }
            const auto rows = qmct::run_study(cfg, threads, quiet ? nullptr : &std::cerr);
            std::ostringstream text;
            if (sim_format == "json")
                text << qmct::study_to_json(cfg, rows).dump(2) << '\n';
            else
                qmct::write_study_delimited(text, cfg, rows);
            if (output_path.empty()) {
                std::cout << text.str();
            } else {
                std::ofstream out(output_path, std::ios::binary);
                if (!out) throw qmct::ConfigError("cannot write '" + output_path + "'");
                out << text.str();
            }
        } else if (*matrices) {
            std::vector<std::string> names;
            for (std::size_t i = 0; i < k; ++i) names.push_back(std::to_string(i + 1));
            qmct::FamilySpec spec;
            spec.name = mfamily;
            if (meffect == "median-iqr") {
                spec.effect = qmct::EffectSpec::MedianIqr;
                spec.quantiles = {0.25, 0.5, 0.75};
            } else if (meffect != "none") {
                throw qmct::ConfigError("unknown effect '" + meffect + "' (expected none, median-iqr)");
            }
            if (k < 2) throw qmct::ConfigError("--k must be at least 2");
            const auto built = qmct::build_family(spec, names);
            print_matrix(std::cout, built.family.matrix(), built.labels);
        } else if (*selftest) {
            return qmct::oracles::run_selftest(std::cout) ? 0 : exit_numerical;
        }
    } catch (const qmct::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const qmct::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const qmct::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const qmct::DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    }
    return 0;
}
