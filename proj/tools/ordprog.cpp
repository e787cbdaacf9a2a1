#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ordinal/errors.hpp"
#include "ordinal/pipeline.hpp"

namespace {

int dispatch(CLI::App& app, ordinal::RunOptions& run, ordinal::SynthOptions& synth,
             ordinal::ReportOptions& report, ordinal::ImportanceOptions& importance,
             const std::vector<std::string>& model_names, const std::string& grid) {
    using namespace ordinal;
    if (app.got_subcommand("synth")) return cmd_synth(synth, std::cout);
    if (app.got_subcommand("report")) return cmd_report(report, std::cout);
    if (app.got_subcommand("importance")) return cmd_importance(importance, std::cout);
    if (app.got_subcommand("run")) {
        run.families.clear();
        for (const auto& name : model_names) run.families.push_back(model_kind_from_string(name));
        if (grid == "single") {
            run.grid_search = false;
        } else {
            run.grid_search = true;
            run.grid = grid_profile_from_string(grid);
        }
        return cmd_run(run, std::cout);
    }
    std::cerr << app.help();
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ordinal functional-outcome prediction workbench"};
    app.require_subcommand(0, 1);

    ordinal::RunOptions run;
    ordinal::SynthOptions synth;
    ordinal::ReportOptions report;
    ordinal::ImportanceOptions importance;
    std::vector<std::string> model_names{"polr"};
    std::string grid = "single";

    auto* s = app.add_subcommand("synth", "Generate a synthetic cohort with known ground truth");
    s->add_option("--out", synth.out_dir, "Output directory")->required();
    s->add_option("--n", synth.n, "Cohort size (default: generating spec's size)");
    s->add_option("--seed", synth.seed, "Random seed");
    s->add_option("--spec", synth.spec_path, "Generating-spec JSON (default: built-in cohort)");

    auto* r = app.add_subcommand("run", "Cross-validate model families on a cohort");
    r->add_option("--cohort", run.cohort_csv, "Cohort CSV")->required();
    r->add_option("--schema", run.schema_json, "Cohort schema JSON")->required();
    r->add_option("--out", run.out_dir, "Output directory")->required();
    r->add_option("--models", model_names,
                  "Model families: mnlr, polr, deep_mn, deep_or, apm_mn, apm_or")
        ->delimiter(',');
    r->add_option("--predictors", run.predictor_set,
                  "Predictor set for tabular families: concise or extended");
    r->add_option("--seed", run.seed, "Random seed");
    r->add_option("--repeats", run.repeats, "Cross-validation repeats");
    r->add_option("--folds", run.folds, "Cross-validation folds");
    r->add_option("--val-frac", run.val_frac, "Tuning-validation fraction of each training set");
    r->add_option("--boot", run.n_boot, "Bootstrap resamples");
    r->add_option("--alpha", run.alpha, "Configuration-dropout survival level");
    r->add_option("--grid", grid,
                  "Configuration grid for network families: paper, desk, or single "
                  "(one fixed configuration, no search)")
        ->check(CLI::IsMember({"paper", "desk", "single"}));
    r->add_option("--dropout-rounds", run.dropout_rounds,
                  "Configuration-dropout rounds during a grid search");
    r->add_option("--widths", run.single_widths, "Hidden widths of the fixed configuration")
        ->delimiter(',');
    r->add_option("--dropout", run.single_dropout, "Dropout rate of the fixed configuration");
    r->add_option("--ridge", run.ridge, "Ridge penalty for the regression families");
    r->add_option("--max-epochs", run.max_epochs, "Epoch cap for network training");
    r->add_option("--patience", run.patience, "Early-stopping patience (epochs)");
    r->add_option("--batch", run.batch_size, "Mini-batch size");
    r->add_option("--pmm-donors", run.pmm.donors, "Imputation donor count");
    r->add_option("--pmm-sweeps", run.pmm.sweeps, "Imputation chained-equation sweeps");
    r->add_option("--jobs", run.jobs, "Worker threads over (partition x configuration) tasks");
    r->add_flag("--no-final", [&run](std::int64_t) { run.train_final = false; },
                "Skip refitting the chosen configuration on the full cohort");

    auto* p = app.add_subcommand("report", "Print a threshold profile and conditional chain");
    p->add_option("--profile", report.profile, "Six exceedance probabilities, highest first")
        ->delimiter(',');
    p->add_option("--model", report.model_path, "Trained model JSON");
    p->add_option("--cohort", report.cohort_csv, "Cohort CSV (with --model)");
    p->add_option("--schema", report.schema_json, "Cohort schema JSON (with --model)");
    p->add_option("--patient", report.patient_id, "Patient id to score (with --model)");
    p->add_option("--lower", report.lower, "Conditioning threshold label, e.g. '>1'");
    p->add_option("--higher", report.higher, "Higher threshold labels, e.g. '>3,>4'")
        ->delimiter(',');
    p->add_flag("--json", report.as_json, "Emit JSON instead of text");

    auto* i = app.add_subcommand("importance", "Token attribution for a trained token model");
    i->add_option("--model", importance.model_path, "Trained apm_mn/apm_or model JSON")
        ->required();
    i->add_option("--cohort", importance.cohort_csv, "Cohort CSV")->required();
    i->add_option("--schema", importance.schema_json, "Cohort schema JSON")->required();
    i->add_option("--out", importance.out_dir, "Output directory")->required();
    i->add_option("--permutations", importance.permutations,
                  "Sampled-estimator permutations for patients with more than 12 tokens");
    i->add_option("--seed", importance.seed, "Random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        return dispatch(app, run, synth, report, importance, model_names, grid);
    } catch (const ordinal::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
