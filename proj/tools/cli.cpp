#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qdina/csv_io.hpp"
#include "qdina/errors.hpp"
#include "qdina/eval.hpp"
#include "qdina/qsearch.hpp"
#include "qdina/simgen.hpp"

#ifndef QDINA_VERSION
#define QDINA_VERSION "0.0.0"
#endif

namespace qdina::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr const char* kManifest = "manifest.json";

class VerifyFailure : public Error
{
public:
    using Error::Error;
};

// Shortest text that reads back to the same double.
std::string format_double(const double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

std::string utc_now()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm {};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string absolute_path(const std::string& p)
{
    return fs::absolute(p).lexically_normal().string();
}

bool is_builtin(const std::string& name)
{
    const auto names = sim::builtin_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

// Built-in names stay as they are; anything else is a file path.
std::string resolve_q_source(const std::string& source)
{
    return is_builtin(source) ? source : absolute_path(source);
}

QMatrix load_q(const std::string& source)
{
    return is_builtin(source) ? sim::builtin_true_q(source) : io::read_qmatrix(source);
}

unsigned default_threads()
{
    const char* env = std::getenv("QDINA_THREADS");
    if (!env || !*env) return 1;
    unsigned value = 0;
    const auto* end = env + std::char_traits<char>::length(env);
    const auto res = std::from_chars(env, end, value);
    if (res.ec != std::errc {} || res.ptr != end) throw ConfigError {"QDINA_THREADS must be a non-negative integer"};
    return value;
}

class OutputDir
{
public:
    explicit OutputDir(fs::path dir) : dir_ {std::move(dir)}
    {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error {"cannot create output directory " + dir_.string() + ": " + ec.message()};
    }

    void write_text(const std::string& name, const std::string& text, const bool listed = true)
    {
        std::ofstream f {dir_ / name, std::ios::binary};
        f << text;
        f.close();
        if (!f) throw Error {"write failed for " + (dir_ / name).string()};
        if (listed) files_.push_back(name);
    }

    void write_matrix(const std::string& name, const BinaryMatrix& m)
    {
        std::ostringstream s;
        io::write_binary_csv(s, m);
        write_text(name, s.str());
    }

    const fs::path& path() const noexcept { return dir_; }
    const std::vector<std::string>& files() const noexcept { return files_; }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

void write_manifest(OutputDir& dir, const std::string& command, const Json& config, const Json& seed,
                    const std::string& started)
{
    Json m;
    m["command"] = command;
    m["version"] = QDINA_VERSION;
    m["config"] = config;
    m["seed"] = seed;
    m["outputs"] = dir.files();
    m["started_utc"] = started;
    m["finished_utc"] = utc_now();
    dir.write_text(kManifest, m.dump(2) + "\n", false);
}

Json strip_timestamps(Json m)
{
    m.erase("started_utc");
    m.erase("finished_utc");
    return m;
}

std::string read_file(const fs::path& path)
{
    std::ifstream f {path, std::ios::binary};
    if (!f) throw Error {"cannot open " + path.string()};
    return {std::istreambuf_iterator<char> {f}, std::istreambuf_iterator<char> {}};
}

vb::Priors make_priors(const std::vector<double>& slip, const std::vector<double>& guess, const double conc)
{
    if (slip.size() != 2 || guess.size() != 2) throw ConfigError {"Beta priors take two values, a,b"};
    vb::Priors p;
    p.slip_a = slip[0];
    p.slip_b = slip[1];
    p.guess_a = guess[0];
    p.guess_b = guess[1];
    p.class_concentration = conc;
    return p;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs
{
    std::string true_q;
    std::size_t n = 0;
    double rho = 0.0;
    std::vector<double> slip {0.2};
    std::vector<double> guess {0.2};
    std::uint64_t seed = 1;
    std::string out;
};

void add_simulate(CLI::App& app, SimulateArgs& a)
{
    auto* c = app.add_subcommand("simulate", "Simulate a correlated-attribute DINA dataset");
    c->add_option("--true-q", a.true_q, "Built-in name (table2-k4, table2-k5, appendix-a1) or Q CSV")->required();
    c->add_option("--n", a.n, "Respondents")->required();
    c->add_option("--rho", a.rho, "Latent attribute correlation in [0, 1)")->capture_default_str();
    c->add_option("--slip", a.slip, "Slip: one value or one per item")->delimiter(',')->capture_default_str();
    c->add_option("--guess", a.guess, "Guessing: one value or one per item")->delimiter(',')->capture_default_str();
    c->add_option("--seed", a.seed)->capture_default_str();
    c->add_option("--out", a.out, "Output directory")->required();
}

int run_simulate(const SimulateArgs& a, std::ostream& out)
{
    const auto started = utc_now();
    sim::SimConfig config;
    config.respondents = a.n;
    config.rho = a.rho;
    config.slip = a.slip;
    config.guess = a.guess;
    config.true_q = load_q(a.true_q);
    config.seed = a.seed;
    const auto data = sim::simulate(config);

    OutputDir dir {a.out};
    dir.write_matrix("responses.csv", data.responses.entries());
    dir.write_matrix("attributes.csv", data.attributes);
    dir.write_matrix("true_q.csv", config.true_q.entries());

    Json cfg;
    cfg["true-q"] = resolve_q_source(a.true_q);
    cfg["n"] = a.n;
    cfg["rho"] = a.rho;
    cfg["slip"] = a.slip;
    cfg["guess"] = a.guess;
    cfg["seed"] = a.seed;
    write_manifest(dir, "simulate", cfg, a.seed, started);

    out << "respondents: " << data.responses.respondents() << "\nitems: " << data.responses.items()
        << "\nattributes: " << config.true_q.attributes() << "\nout: " << dir.path().string() << '\n';
    return 0;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs
{
    std::string responses;
    int attributes = 0;
    int runs = 10;
    int iters = 550;
    int discard = 50;
    std::size_t subset = 0;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::string sampling = "with";
    bool full_trace = false;
    double vb_tol = 1e-5;
    int vb_max_sweeps = 500;
    double vb_jitter = 0.5;
    std::vector<double> prior_slip {1.0, 1.0};
    std::vector<double> prior_guess {1.0, 1.0};
    double class_concentration = 1.0;
    std::string initial_q;
    std::string out;
};

void add_vb_options(CLI::App& c, double& tol, int& sweeps, std::vector<double>& slip, std::vector<double>& guess,
                    double& conc)
{
    c.add_option("--vb-tol", tol, "Relative ELBO tolerance of each VB fit")->capture_default_str();
    c.add_option("--vb-max-sweeps", sweeps)->capture_default_str();
    c.add_option("--prior-slip", slip, "Beta prior a,b on slip")->delimiter(',')->expected(2)->capture_default_str();
    c.add_option("--prior-guess", guess, "Beta prior a,b on guessing")->delimiter(',')->expected(2)->capture_default_str();
    c.add_option("--class-concentration", conc, "Dirichlet concentration on class weights")->capture_default_str();
}

void add_estimate(CLI::App& app, EstimateArgs& a)
{
    auto* c = app.add_subcommand("estimate", "Estimate a Q-matrix from responses");
    c->add_option("--responses", a.responses, "Response CSV (N x J)")->required();
    c->add_option("--attributes", a.attributes, "Number of attributes K")->required();
    c->add_option("--runs", a.runs, "Independent runs R")->capture_default_str();
    c->add_option("--iters", a.iters, "Iterations per run T")->capture_default_str();
    c->add_option("--discard", a.discard, "Burn-in iterations D")->capture_default_str();
    c->add_option("--subset", a.subset, "Subsample size S (0: N/2)")->capture_default_str();
    c->add_option("--seed", a.seed)->capture_default_str();
    c->add_option("--threads", a.threads, "Parallel runs (0: all cores; default from QDINA_THREADS)")
        ->capture_default_str();
    c->add_option("--sampling", a.sampling, "Subsampling with or without replacement")
        ->check(CLI::IsMember({"with", "without"}))
        ->capture_default_str();
    c->add_flag("--full-trace,!--no-full-trace", a.full_trace, "Refit the selected run's Q sequence on all data");
    c->add_option("--vb-jitter", a.vb_jitter, "Initial responsibility jitter")->capture_default_str();
    add_vb_options(*c, a.vb_tol, a.vb_max_sweeps, a.prior_slip, a.prior_guess, a.class_concentration);
    c->add_option("--initial-q", a.initial_q, "Starting Q CSV for every run (default: random)");
    c->add_option("--out", a.out, "Output directory")->required();
}

int run_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err)
{
    const auto started = utc_now();
    const auto x = io::read_responses(a.responses);

    search::SearchConfig config;
    config.attributes = a.attributes;
    config.runs = a.runs;
    config.iterations = a.iters;
    config.discard = a.discard;
    config.subset = a.subset;
    config.seed = a.seed;
    config.threads = a.threads;
    config.sampling = a.sampling == "with" ? search::Sampling::with_replacement : search::Sampling::without_replacement;
    config.priors = make_priors(a.prior_slip, a.prior_guess, a.class_concentration);
    config.vb.tol = a.vb_tol;
    config.vb.max_sweeps = a.vb_max_sweeps;
    config.vb.init_jitter = a.vb_jitter;
    config.keep_samples = false;
    if (!a.initial_q.empty()) config.initial_q = io::read_qmatrix(a.initial_q);
    config = config.resolved(x.respondents(), x.items());

    const auto est = search::estimate(x, config);
    if (est.runs.size() < static_cast<std::size_t>(config.runs)) {
        err << "warning: " << config.runs - static_cast<int>(est.runs.size()) << " of " << config.runs
            << " runs failed and were skipped\n";
    }

    OutputDir dir {a.out};
    dir.write_matrix("q_hat.csv", est.q.entries());

    std::ostringstream runs;
    runs << "run,seed,mean_elbo,selected,q_hat\n";
    for (std::size_t i = 0; i < est.runs.size(); ++i) {
        const auto& r = est.runs[i];
        runs << r.run + 1 << ',' << r.seed << ',' << format_double(r.mean_elbo) << ',' << (i == est.selected) << ','
             << io::flatten(r.averaged_q) << '\n';
    }
    dir.write_text("runs.csv", runs.str());

    for (const auto& r : est.runs) {
        std::ostringstream trace;
        trace << "t,elbo,vb_converged,q\n";
        for (const auto& rec : r.records) {
            trace << rec.t << ',' << format_double(rec.elbo) << ',' << rec.vb_converged << ',' << io::flatten(rec.q)
                  << '\n';
        }
        dir.write_text("trace_run" + std::to_string(r.run + 1) + ".csv", trace.str());
    }

    if (a.full_trace) {
        const auto& sel = est.runs[est.selected];
        const auto full = search::full_elbo_trace(x, sel.records, config.priors, config.vb, sel.seed);
        std::ostringstream trace;
        trace << "t,elbo\n";
        for (std::size_t i = 0; i < full.size(); ++i) trace << sel.records[i].t << ',' << format_double(full[i]) << '\n';
        dir.write_text("full_elbo_trace.csv", trace.str());
    }

    Json cfg;
    cfg["responses"] = absolute_path(a.responses);
    cfg["attributes"] = a.attributes;
    cfg["runs"] = config.runs;
    cfg["iters"] = config.iterations;
    cfg["discard"] = config.discard;
    cfg["subset"] = config.subset;
    cfg["seed"] = config.seed;
    cfg["threads"] = a.threads;
    cfg["sampling"] = a.sampling;
    cfg["full-trace"] = a.full_trace;
    cfg["vb-jitter"] = a.vb_jitter;
    cfg["vb-tol"] = a.vb_tol;
    cfg["vb-max-sweeps"] = a.vb_max_sweeps;
    cfg["prior-slip"] = a.prior_slip;
    cfg["prior-guess"] = a.prior_guess;
    cfg["class-concentration"] = a.class_concentration;
    if (!a.initial_q.empty()) cfg["initial-q"] = absolute_path(a.initial_q);
    write_manifest(dir, "estimate", cfg, config.seed, started);

    out << "selected_run: " << est.runs[est.selected].run + 1 << "\nmean_elbo: "
        << format_double(est.runs[est.selected].mean_elbo) << "\nq_hat: " << (dir.path() / "q_hat.csv").string()
        << '\n';
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs
{
    std::string truth;
    std::vector<std::string> estimates;
    bool align = true;
    std::string out;
};

void add_evaluate(CLI::App& app, EvaluateArgs& a)
{
    auto* c = app.add_subcommand("evaluate", "Score estimated Q-matrices against the truth");
    c->add_option("--truth", a.truth, "True Q CSV or built-in name")->required();
    c->add_option("estimates,--estimates", a.estimates, "Estimated Q CSV files")->required();
    c->add_flag("--align,!--no-align", a.align, "Align columns before scoring")->capture_default_str();
    c->add_option("--out", a.out, "Output directory")->required();
}

std::string permutation_text(const eval::Permutation& p)
{
    std::string s;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (k) s += ' ';
        s += std::to_string(p[k] + 1);
    }
    return s;
}

int run_evaluate(const EvaluateArgs& a, std::ostream& out)
{
    const auto started = utc_now();
    const auto truth = load_q(a.truth);
    std::vector<QMatrix> estimates;
    std::vector<std::string> paths;
    for (const auto& e : a.estimates) {
        estimates.push_back(io::read_qmatrix(e));
        paths.push_back(absolute_path(e));
    }
    const auto report = eval::mean_recovery(estimates, truth, a.align);

    std::ostringstream text;
    text << "estimates: " << estimates.size() << "\naligned: " << (a.align ? "true" : "false")
         << "\nmrr: " << format_double(report.mrr) << "\nraw_mrr: " << format_double(report.raw_mrr) << '\n';
    std::ostringstream rates;
    rates << "file,rate,raw_rate,permutation\n";
    for (std::size_t m = 0; m < estimates.size(); ++m) {
        rates << paths[m] << ',' << format_double(report.per_dataset_rates[m]) << ','
              << format_double(report.raw_rates[m]) << ',' << permutation_text(report.permutation_used[m]) << '\n';
    }

    OutputDir dir {a.out};
    dir.write_text("report.txt", text.str());
    dir.write_text("rates.csv", rates.str());

    Json cfg;
    cfg["truth"] = resolve_q_source(a.truth);
    cfg["estimates"] = paths;
    cfg["align"] = a.align;
    write_manifest(dir, "evaluate", cfg, nullptr, started);

    out << text.str();
    return 0;
}

// ---------------------------------------------------------------- fit

struct FitArgs
{
    std::string responses;
    std::vector<std::string> qmatrices;
    int restarts = 5;
    std::uint64_t seed = 1;
    double vb_tol = 1e-5;
    int vb_max_sweeps = 500;
    std::vector<double> prior_slip {1.0, 1.0};
    std::vector<double> prior_guess {1.0, 1.0};
    double class_concentration = 1.0;
    std::string out;
};

void add_fit(CLI::App& app, FitArgs& a)
{
    auto* c = app.add_subcommand("fit", "Compare Q-matrices by full-data negative ELBO");
    c->add_option("--responses", a.responses, "Response CSV (N x J)")->required();
    c->add_option("qmatrices,--qmatrices", a.qmatrices, "Q CSV files or built-in names")->required();
    c->add_option("--restarts", a.restarts, "VB restarts per Q (best kept)")->capture_default_str();
    c->add_option("--seed", a.seed)->capture_default_str();
    add_vb_options(*c, a.vb_tol, a.vb_max_sweeps, a.prior_slip, a.prior_guess, a.class_concentration);
    c->add_option("--out", a.out, "Output directory")->required();
}

int run_fit(const FitArgs& a, std::ostream& out)
{
    const auto started = utc_now();
    const auto x = io::read_responses(a.responses);
    const auto priors = make_priors(a.prior_slip, a.prior_guess, a.class_concentration);
    vb::Options options;
    options.tol = a.vb_tol;
    options.max_sweeps = a.vb_max_sweeps;

    std::vector<std::string> sources;
    std::ostringstream table;
    table << "q,negative_elbo\n";
    for (const auto& source : a.qmatrices) {
        const auto q = load_q(source);
        const double value = eval::negative_elbo_fit(x, q, priors, options, a.restarts, a.seed);
        sources.push_back(resolve_q_source(source));
        table << sources.back() << ',' << format_double(value) << '\n';
    }

    OutputDir dir {a.out};
    dir.write_text("fit.csv", table.str());

    Json cfg;
    cfg["responses"] = absolute_path(a.responses);
    cfg["qmatrices"] = sources;
    cfg["restarts"] = a.restarts;
    cfg["seed"] = a.seed;
    cfg["vb-tol"] = a.vb_tol;
    cfg["vb-max-sweeps"] = a.vb_max_sweeps;
    cfg["prior-slip"] = a.prior_slip;
    cfg["prior-guess"] = a.prior_guess;
    cfg["class-concentration"] = a.class_concentration;
    write_manifest(dir, "fit", cfg, a.seed, started);

    out << table.str();
    return 0;
}

// ---------------------------------------------------------------- replay

struct ReplayArgs
{
    std::string manifest;
    std::string out;
    bool verify = false;
};

void add_replay(CLI::App& app, ReplayArgs& a)
{
    auto* c = app.add_subcommand("replay", "Rerun the command recorded in a manifest");
    c->add_option("manifest", a.manifest, "manifest.json of an earlier run")->required();
    c->add_option("--out", a.out, "Output directory for the rerun")->required();
    c->add_flag("--verify", a.verify, "Fail unless every output matches the original byte for byte");
}

std::string json_arg(const Json& v)
{
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

std::vector<std::string> manifest_args(const Json& manifest)
{
    std::vector<std::string> args {manifest.at("command").get<std::string>()};
    for (const auto& [key, value] : manifest.at("config").items()) {
        if (value.is_boolean()) {
            args.push_back((value.get<bool>() ? "--" : "--no-") + key);
        } else if (value.is_array() && !value.empty() && value.front().is_string()) {
            args.push_back("--" + key);
            for (const auto& v : value) args.push_back(v.get<std::string>());
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) joined += (joined.empty() ? "" : ",") + json_arg(v);
            args.push_back("--" + key);
            args.push_back(joined);
        } else {
            args.push_back("--" + key);
            args.push_back(json_arg(value));
        }
    }
    return args;
}

int run_replay(const ReplayArgs& a, std::ostream& out, std::ostream& err)
{
    const fs::path manifest_path {a.manifest};
    Json manifest;
    try {
        manifest = Json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError {"bad manifest " + manifest_path.string() + ": " + e.what()};
    }
    if (manifest.value("command", "") == "replay") throw ConfigError {"manifest records a replay"};
    if (fs::exists(a.out) && fs::equivalent(fs::absolute(a.out), fs::absolute(manifest_path).parent_path())) {
        throw ConfigError {"replay output directory must differ from the original"};
    }

    auto args = manifest_args(manifest);
    args.push_back("--out");
    args.push_back(a.out);
    const int code = run(args, out, err);
    if (code != 0 || !a.verify) return code;

    const auto original = fs::absolute(manifest_path).parent_path();
    std::vector<std::string> mismatched;
    for (const auto& name : manifest.at("outputs")) {
        const auto file = name.get<std::string>();
        if (!fs::exists(fs::path {a.out} / file) || read_file(original / file) != read_file(fs::path {a.out} / file)) {
            mismatched.push_back(file);
        }
    }
    const auto rerun = Json::parse(read_file(fs::path {a.out} / kManifest));
    if (strip_timestamps(rerun) != strip_timestamps(manifest)) mismatched.push_back(kManifest);
    if (!mismatched.empty()) {
        std::string list;
        for (const auto& m : mismatched) list += " " + m;
        throw VerifyFailure {"replay differs from the original in:" + list};
    }
    out << "verified: " << manifest.at("outputs").size() << " outputs identical\n";
    return 0;
}

// Flat `key = value` lines; '#' starts a comment. Values may be quoted.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path)
{
    std::ifstream in {path};
    if (!in) throw ConfigError {"cannot open config file " + path};
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string {} : s.substr(b, e - b + 1);
    };
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    for (std::size_t no = 1; std::getline(in, line); ++no) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError {path + ":" + std::to_string(no) + ": expected key = value"};
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
            value = value.substr(1, value.size() - 2);
        }
        entries.emplace_back(std::move(key), std::move(value));
    }
    return entries;
}

bool mentions(const std::vector<std::string>& args, const CLI::Option& opt)
{
    for (const auto& a : args) {
        for (const auto& name : opt.get_lnames()) {
            const auto flag = "--" + name;
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        }
    }
    return false;
}

// Splices the entries of `--config FILE` in after the subcommand name, skipping
// keys that are already on the command line, so flags win over the file.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const CLI::App& app)
{
    if (args.empty()) return args;
    const CLI::App* sub = nullptr;
    try {
        sub = app.get_subcommand(args.front());
    } catch (const CLI::OptionNotFound&) {
        return args;
    }
    std::string path;
    std::vector<std::string> rest;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (path.empty()) return args;

    std::vector<std::string> expanded {args.front()};
    for (const auto& [key, value] : read_config(path)) {
        const auto* opt = sub->get_option_no_throw("--" + key);
        if (!opt || key == "config") throw ConfigError {"unknown key '" + key + "' in " + path};
        if (mentions(rest, *opt)) continue;
        if (opt->get_expected_min() == 0) {
            if (value == "true" || value == "1") {
                expanded.push_back("--" + key);
            } else if (value == "false" || value == "0") {
                expanded.push_back("--no-" + key);
            } else {
                throw ConfigError {"key '" + key + "' in " + path + " takes true or false"};
            }
        } else {
            expanded.push_back("--" + key);
            expanded.push_back(value);
        }
    }
    expanded.insert(expanded.end(), rest.begin(), rest.end());
    return expanded;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app {"Q-matrix estimation for the DINA model by stochastic variational search", "qdina"};
    app.set_version_flag("--version", QDINA_VERSION);
    app.require_subcommand(1);

    SimulateArgs sim_args;
    EstimateArgs est_args;
    EvaluateArgs eval_args;
    FitArgs fit_args;
    ReplayArgs replay_args;
    try {
        est_args.threads = default_threads();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    add_simulate(app, sim_args);
    add_estimate(app, est_args);
    add_evaluate(app, eval_args);
    add_fit(app, fit_args);
    add_replay(app, replay_args);
    std::string config_file;  // consumed by expand_config; declared for --help
    for (auto* sub : app.get_subcommands({})) {
        if (sub->get_name() != "replay") sub->add_option("--config", config_file, "Flat key = value file; flags override it");
    }

    try {
        const auto expanded = expand_config(args, app);
        std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
        app.parse(reversed);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        const auto& name = app.get_subcommands().front()->get_name();
        if (name == "simulate") return run_simulate(sim_args, out);
        if (name == "estimate") return run_estimate(est_args, out, err);
        if (name == "evaluate") return run_evaluate(eval_args, out);
        if (name == "fit") return run_fit(fit_args, out);
        return run_replay(replay_args, out, err);
    } catch (const VerifyFailure& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace qdina::cli
