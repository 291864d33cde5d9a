#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <type_traits>

#include "skillkt/checkpoint.hpp"
#include "skillkt/experiment.hpp"
#include "skillkt/synthetic.hpp"

namespace skillkt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> read_config_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::vector<std::string> args;
    std::string line;
    std::size_t number = 0;
    auto trim = [](std::string s) {
        const auto first = s.find_first_not_of(" \t\r");
        if (first == std::string::npos) return std::string();
        const auto last = s.find_last_not_of(" \t\r");
        return s.substr(first, last - first + 1);
    };
    while (std::getline(in, line)) {
        ++number;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ParseError("config file " + path.string() + ": expected key=value", number);
        }
        // an empty value keeps the option's default, which is how unset paths are echoed
        const auto value = trim(line.substr(eq + 1));
        if (!value.empty()) args.push_back("--" + trim(line.substr(0, eq)) + "=" + value);
    }
    return args;
}

fs::path output_path(const std::string& path)
{
    fs::path p(path);
    if (p.is_relative()) {
        if (const char* dir = std::getenv("SKILLKT_OUTPUT_DIR"); dir && *dir) p = fs::path(dir) / p;
    }
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return p;
}

namespace {

std::string format_value(const std::string& v) { return v; }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
template <class T>
    requires std::is_integral_v<T>
std::string format_value(T v)
{
    return std::to_string(v);
}

/// Registers options on a subcommand and remembers them for the config echo.
class Binder
{
public:
    explicit Binder(CLI::App* app)
        : app_(app)
    {
        app_->add_option("--config", config_path_, "key=value file; command-line flags take precedence");
    }

    template <class T>
    CLI::Option* option(const std::string& name, T& var, const std::string& help)
    {
        echo_.emplace_back(name, [&var] { return format_value(var); });
        return app_->add_option("--" + name, var, help)
            ->capture_default_str()
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }

    CLI::Option* flag(const std::string& name, bool& var, const std::string& help)
    {
        echo_.emplace_back(name, [&var] { return format_value(var); });
        return app_->add_flag("--" + name, var, help)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }

    std::string echo() const
    {
        std::string s;
        for (const auto& [name, value] : echo_) s += name + "=" + value() + "\n";
        return s;
    }

private:
    CLI::App* app_;
    std::string config_path_;
    std::vector<std::pair<std::string, std::function<std::string()>>> echo_;
};

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> parse_fractions(const std::string& s)
{
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || !(v > 0.0 && v <= 1.0)) {
            throw ConfigError("--fractions: '" + item + "' is not a fraction in (0, 1]");
        }
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("--fractions: empty list");
    return out;
}

std::vector<Arm> parse_arms(const std::string& s)
{
    std::vector<Arm> out;
    for (const auto& item : split_list(s)) out.push_back(parse_arm(item));
    if (out.empty()) throw ConfigError("--arms: empty list");
    return out;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("failed writing " + path.string());
}

void write_echo(const fs::path& artifact, const std::string& echo)
{
    write_text(fs::path(artifact.string() + ".config"), echo);
}

json finite_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

// ---------------------------------------------------------------------------

struct DataOptions
{
    std::string interactions;
    std::string col_user = "user_id";
    std::string col_skill = "skill_id";
    std::string col_correct = "correct";
    std::string col_order;
    std::string delimiter = ",";
    int n_skills = 0;

    void bind(Binder& b, bool with_n_skills = true)
    {
        b.option("interactions", interactions, "interaction log")->required();
        b.option("col-user", col_user, "student column");
        b.option("col-skill", col_skill, "skill column");
        b.option("col-correct", col_correct, "correctness column (0/1)");
        b.option("col-order", col_order, "ordering column; empty keeps file order");
        b.option("delimiter", delimiter, "field delimiter: one character or 'tab'");
        if (with_n_skills) b.option("n-skills", n_skills, "> 0: skill column already holds ids in [0, n)");
    }

    InteractionSchema schema() const
    {
        InteractionSchema s;
        s.user_column = col_user;
        s.skill_column = col_skill;
        s.correct_column = col_correct;
        s.order_column = col_order;
        if (delimiter == "tab" || delimiter == "\\t") {
            s.delimiter = '\t';
        } else if (delimiter.size() == 1) {
            s.delimiter = delimiter[0];
        } else {
            throw ConfigError("--delimiter must be one character or 'tab', got '" + delimiter + "'");
        }
        if (n_skills < 0) throw ConfigError("--n-skills must be non-negative");
        s.n_skills = n_skills;
        return s;
    }
};

struct ModelOptions
{
    ModelConfig config;
    std::string precision = "float32";

    void bind(Binder& b)
    {
        b.option("d-model", config.d_model, "model width");
        b.option("heads", config.n_heads, "attention heads");
        b.option("encoder-layers", config.n_encoder_layers, "encoder blocks");
        b.option("decoder-layers", config.n_decoder_layers, "decoder blocks");
        b.option("dropout", config.dropout, "dropout probability");
        b.option("skill-dim", config.skill_dim, "skill vector dimension");
        b.option("max-len", config.max_len, "window length; longer histories are chunked");
        b.option("lambda", config.lambda, "projection-loss weight; 0 disables it");
        b.option("ff-dim", config.feedforward_dim, "feed-forward width");
        b.option("projection-hidden", config.projection_hidden, "> 0: two-layer projection with this width");
        b.option("precision", precision, "float32 or float64")->check(CLI::IsMember({"float32", "float64"}));
    }
};

struct TrainOptions
{
    TrainConfig train;
    SplitSpec split;
    std::string split_by = "record";

    SplitSpec spec() const
    {
        SplitSpec s = split;
        s.mode = parse_split_mode(split_by);
        return s;
    }

    void bind(Binder& b)
    {
        b.option("epochs", train.epochs, "maximum epochs");
        b.option("batch-size", train.batch_size, "sequences per batch");
        b.option("lr", train.learning_rate, "Adam learning rate");
        b.option("patience", train.patience, "epochs without eval-AUC improvement before stopping");
        b.option("seed", train.seed, "init, batch order and dropout seed");
        b.option("eval-every", train.eval_every, "evaluate every k epochs");
        b.option("split-by", split_by, "record, student or chronological")
            ->check(CLI::IsMember({"record", "student", "chronological"}));
        b.option("train-fraction", split.train_fraction, "train share of records, students, or each student's history");
        b.option("subsample", split.subsample_fraction, "fraction of the train split to keep");
        b.option("split-seed", split.seed, "split and subsample seed");
    }
};

struct WalkOptions
{
    WalkConfig walk;

    void bind(Binder& b, bool with_dim_and_seed)
    {
        if (with_dim_and_seed) {
            b.option("dim", walk.dim, "vector dimension");
            b.option("seed", walk.seed, "walk and skip-gram seed");
        }
        b.option("walk-length", walk.walk_length, "nodes per walk");
        b.option("num-walks", walk.num_walks, "total walks");
        b.option("window", walk.window, "skip-gram window");
        b.option("p", walk.p, "return parameter");
        b.option("q", walk.q, "in-out parameter");
        b.option("negatives", walk.negatives, "negative samples per pair");
        b.option("sg-epochs", walk.epochs, "skip-gram passes over the corpus");
        b.option("sg-lr", walk.learning_rate, "initial skip-gram learning rate");
        b.option("shards", walk.shards, "walk shards");
    }
};

// ---------------------------------------------------------------------------

struct EmbedCommand
{
    std::string edges;
    int n_skills = 0;
    bool random_graph = false;
    std::int64_t edges_count = 0;
    std::string out_path;
    WalkOptions walk;

    void bind(Binder& b)
    {
        b.option("edges", edges, "skill edge list");
        b.option("n-skills", n_skills, "number of skills")->required();
        b.flag("random-graph", random_graph, "embed a random graph instead");
        b.option("edges-count", edges_count, "edges in the random graph; 0 matches --edges");
        b.option("out", out_path, "embedding file")->required();
        walk.bind(b, true);
    }

    int run(const std::string& echo, std::ostream& out)
    {
        if (n_skills < 1) throw ConfigError("--n-skills must be positive");
        SkillGraph graph;
        if (random_graph) {
            std::size_t count = static_cast<std::size_t>(std::max<std::int64_t>(edges_count, 0));
            if (count == 0) {
                if (edges.empty()) throw ConfigError("--random-graph needs --edges-count or --edges to match");
                count = load_edge_list(fs::path(edges), n_skills).edge_count();
            }
            graph = random_skill_graph(n_skills, count, walk.walk.seed);
        } else {
            if (edges.empty()) throw ConfigError("--edges is required unless --random-graph is set");
            graph = load_edge_list(fs::path(edges), n_skills);
        }
        out << "graph: " << graph.node_count() << " nodes, " << graph.edge_count() << " edges, "
            << graph.isolated_nodes().size() << " isolated skills\n";
        const auto result = skill2vec(graph, walk.walk);
        for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
            out << "skip-gram epoch " << e + 1 << " loss " << result.epoch_loss[e] << '\n';
        }
        const auto path = output_path(out_path);
        write_embeddings(result.table, path);
        write_echo(path, echo);
        out << "wrote " << path.string() << '\n';
        return exit_ok;
    }
};

struct SynthCommand
{
    SynthConfig synth;
    std::string out_path;
    std::string edges_out;

    void bind(Binder& b)
    {
        b.option("students", synth.n_students, "simulated students");
        b.option("skills", synth.n_skills, "skills");
        b.option("clusters", synth.n_clusters, "skill clusters");
        b.option("interactions", synth.interactions_per_student, "interactions per student");
        b.option("growth", synth.learning_rate, "ability gain per practiced interaction");
        b.option("ability-sd", synth.ability_sd, "spread of initial abilities");
        b.option("difficulty-sd", synth.difficulty_sd, "spread of skill difficulties");
        b.option("stickiness", synth.cluster_stickiness, "probability of staying in the current cluster");
        b.option("seed", synth.seed, "generator seed");
        b.option("out", out_path, "interaction file")->required();
        b.option("edges-out", edges_out, "ground-truth edge list")->required();
    }

    int run(const std::string& echo, std::ostream& out)
    {
        const auto data = synthesize_students(synth);
        const auto log_path = output_path(out_path);
        {
            std::ofstream f(log_path, std::ios::binary);
            if (!f) throw ConfigError("cannot write " + log_path.string());
            write_interactions(data.records, f);
        }
        const auto edge_path = output_path(edges_out);
        {
            std::ofstream f(edge_path, std::ios::binary);
            if (!f) throw ConfigError("cannot write " + edge_path.string());
            write_edge_list(data.truth, f);
        }
        write_echo(log_path, echo);
        write_echo(edge_path, echo);
        out << "wrote " << data.records.size() << " interactions to " << log_path.string() << " and "
            << data.truth.edge_count() << " edges to " << edge_path.string() << '\n';
        return exit_ok;
    }
};

struct TrainCommand
{
    DataOptions data;
    ModelOptions model;
    TrainOptions train;
    std::string embeddings;
    std::string checkpoint;
    std::string metrics;
    std::string metrics_tsv;

    void bind(Binder& b)
    {
        data.bind(b);
        model.bind(b);
        train.bind(b);
        b.option("embeddings", embeddings, "skill vectors; read only when --lambda > 0");
        b.option("checkpoint", checkpoint, "checkpoint file")->required();
        b.option("metrics", metrics, "JSON metrics file")->required();
        b.option("metrics-tsv", metrics_tsv, "optional per-epoch TSV");
    }

    template <class Scalar>
    int run_typed(const std::string& echo, std::ostream& out, std::ostream& err)
    {
        const auto& mc = model.config;
        mc.validate();
        train.train.validate();
        const SplitSpec split_spec = train.spec();
        split_spec.validate();
        const auto log = parse_interactions(fs::path(data.interactions), data.schema());
        out << "interactions: " << log.records.size() << " records, " << log.n_skills << " skills, "
            << log.dropped_missing_skill + log.dropped_bad_correct << " rows dropped\n";

        EmbeddingTable skills;
        const bool use_projection = mc.lambda > 0.0;
        if (use_projection) {
            if (embeddings.empty()) throw ConfigError("--embeddings is required when --lambda > 0");
            skills = read_embeddings(fs::path(embeddings));
            if (skills.count() != log.n_skills) {
                throw ConfigError("--embeddings has " + std::to_string(skills.count()) + " vectors but the log has "
                                  + std::to_string(log.n_skills) + " skills");
            }
        }

        const auto split = split_records(log.records, split_spec);
        const auto train_batches = make_batches(build_sequences(split.train, mc.max_len), log.n_skills, mc.max_len,
                                                train.train.batch_size);
        const auto eval_batches = make_batches(build_sequences(split.eval, mc.max_len), log.n_skills, mc.max_len,
                                               train.train.batch_size);
        out << "split: " << split.train.size() << " train / " << split.eval.size() << " eval records\n";

        KTModel<Scalar> kt(mc, log.n_skills, train.train.seed);
        AdamState<Scalar> adam;
        const json meta = {{"config", echo},
                           {"skill_labels", log.skill_labels},
                           {"split", {{"mode", split_mode_name(split_spec.mode)},
                                      {"train_fraction", split_spec.train_fraction},
                                      {"subsample_fraction", split_spec.subsample_fraction},
                                      {"seed", split_spec.seed}}}};
        const auto ckpt_path = output_path(checkpoint);

        TrainCallbacks<Scalar> callbacks;
        callbacks.on_epoch = [&](const KTModel<Scalar>& m, const AdamState<Scalar>& s, const EpochMetrics& e,
                                 bool improved) {
            out << "epoch " << e.epoch << " kt_loss " << e.train_kt_loss;
            if (e.train_projection_loss) out << " proj_loss " << *e.train_projection_loss;
            if (e.eval_auc) out << " eval_auc " << *e.eval_auc;
            out << (improved ? " *" : "") << std::endl;
            if (improved) save_checkpoint(make_checkpoint(m, &s, e.epoch, meta), ckpt_path);
        };

        ExperimentResult result;
        std::string aborted;
        try {
            result = skillkt::train(kt, train_batches, eval_batches, use_projection ? &skills : nullptr, train.train,
                                    &adam, callbacks);
            if (eval_batches.empty()) save_checkpoint(make_checkpoint(kt, &adam, result.epochs_run, meta), ckpt_path);
        } catch (const TrainingAborted& e) {
            result = e.partial();
            aborted = e.what();
        }
        result.config_echo = echo;

        json doc = {{"config", echo},
                    {"n_skills", log.n_skills},
                    {"train_records", split.train.size()},
                    {"eval_records", split.eval.size()},
                    {"best_auc", finite_or_null(result.best_auc)},
                    {"best_epoch", result.best_epoch},
                    {"final_auc", finite_or_null(result.final_auc)},
                    {"epochs_run", result.epochs_run},
                    {"aborted", aborted.empty() ? json(nullptr) : json(aborted)}};
        doc["epochs"] = json::array();
        std::ostringstream tsv;
        tsv << "epoch\ttrain_kt_loss\ttrain_projection_loss\teval_auc\n";
        for (const auto& e : result.epochs) {
            json row = {{"epoch", e.epoch}, {"train_kt_loss", e.train_kt_loss}};
            row["train_projection_loss"] = e.train_projection_loss ? json(*e.train_projection_loss) : json(nullptr);
            row["eval_auc"] = e.eval_auc ? json(*e.eval_auc) : json(nullptr);
            doc["epochs"].push_back(row);
            tsv << e.epoch << '\t' << format_value(e.train_kt_loss) << '\t'
                << (e.train_projection_loss ? format_value(*e.train_projection_loss) : "") << '\t'
                << (e.eval_auc ? format_value(*e.eval_auc) : "") << '\n';
        }
        const auto metrics_path = output_path(metrics);
        write_text(metrics_path, doc.dump(2) + "\n");
        write_echo(metrics_path, echo);
        if (!metrics_tsv.empty()) write_text(output_path(metrics_tsv), tsv.str());
        out << "training took " << result.wall_clock_seconds << " s\n";

        if (!aborted.empty()) {
            err << "error: training aborted: " << aborted << " (last good checkpoint kept)\n";
            return exit_numeric;
        }
        out << "best eval auc " << result.best_auc << " at epoch " << result.best_epoch << '\n';
        return exit_ok;
    }

    int run(const std::string& echo, std::ostream& out, std::ostream& err)
    {
        return model.precision == "float64" ? run_typed<double>(echo, out, err) : run_typed<float>(echo, out, err);
    }
};

struct EvalCommand
{
    DataOptions data;
    std::string checkpoint;
    std::string subset = "all";
    std::string out_path;
    int batch_size = 64;

    void bind(Binder& b)
    {
        data.bind(b, false);
        b.option("checkpoint", checkpoint, "checkpoint file")->required();
        b.option("subset", subset, "all, train or eval (split as recorded in the checkpoint)")
            ->check(CLI::IsMember({"all", "train", "eval"}));
        b.option("batch-size", batch_size, "sequences per batch");
        b.option("out", out_path, "optional JSON report");
    }

    template <class Scalar>
    double pooled_auc(const CheckpointData& ckpt, std::span<const Batch> batches, std::size_t& positions)
    {
        const auto model = model_from_checkpoint<Scalar>(ckpt);
        const auto pooled = pool_predictions(model, batches);
        positions = pooled.scores.size();
        return auc(pooled.scores, pooled.labels);
    }

    int run(const std::string& echo, std::ostream& out, std::ostream&)
    {
        if (batch_size < 1) throw ConfigError("--batch-size must be positive");
        const auto ckpt = load_checkpoint(fs::path(checkpoint));
        auto schema = data.schema();
        if (ckpt.meta.contains("skill_labels")) {
            schema.skill_labels = ckpt.meta["skill_labels"].get<std::vector<std::string>>();
            schema.n_skills = 0;
        }
        const auto log = parse_interactions(fs::path(data.interactions), schema);
        if (log.n_skills != ckpt.n_problems) {
            throw ConfigError("checkpoint expects " + std::to_string(ckpt.n_problems) + " skills, the log maps to "
                              + std::to_string(log.n_skills));
        }
        std::vector<InteractionRecord> records = log.records;
        if (subset != "all") {
            SplitSpec spec;
            if (ckpt.meta.contains("split")) {
                const auto& s = ckpt.meta["split"];
                spec.mode = parse_split_mode(s.value("mode", "record"));
                spec.train_fraction = s.at("train_fraction").get<double>();
                spec.subsample_fraction = s.at("subsample_fraction").get<double>();
                spec.seed = s.at("seed").get<std::uint64_t>();
            }
            auto split = split_records(log.records, spec);
            records = subset == "train" ? std::move(split.train) : std::move(split.eval);
        }
        const int max_len = ckpt.model_config.max_len;
        const auto batches = make_batches(build_sequences(records, max_len), log.n_skills, max_len, batch_size);
        std::size_t positions = 0;
        const double value = ckpt.scalar == "float64" ? pooled_auc<double>(ckpt, batches, positions)
                                                      : pooled_auc<float>(ckpt, batches, positions);
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.6f", value);
        out << "auc " << buf << " over " << positions << " positions\n";
        if (!out_path.empty()) {
            const json doc = {{"config", echo}, {"subset", subset}, {"auc", value}, {"positions", positions}};
            const auto path = output_path(out_path);
            write_text(path, doc.dump(2) + "\n");
            write_echo(path, echo);
        }
        return exit_ok;
    }
};

struct ExperimentCommand
{
    DataOptions data;
    ModelOptions model;
    TrainOptions train;
    WalkOptions walk;
    std::string edges;
    std::string mode = "ablation";
    std::string fractions = "0.05,0.1,0.5,1.0";
    std::string arms;
    int seeds = 5;
    std::string grid;
    std::string summary;
    std::string table;

    void bind(Binder& b)
    {
        data.bind(b);
        model.bind(b);
        train.bind(b);
        walk.bind(b, false);
        b.option("edges", edges, "skill edge list")->required();
        b.option("mode", mode, "ablation, limited or both")->check(CLI::IsMember({"ablation", "limited", "both"}));
        b.option("fractions", fractions, "comma-separated training fractions for the limited-data study");
        b.option("arms", arms, "comma-separated arms (ours, noproj, random); empty uses the mode default");
        b.option("seeds", seeds, "paired seeds 0..n-1 per cell");
        b.option("grid", grid, "TSV grid, one row per cell")->required();
        b.option("summary", summary, "JSON summary")->required();
        b.option("table", table, "optional human-readable table");
    }

    int run(const std::string& echo, std::ostream& out, std::ostream&)
    {
        if (seeds < 1) throw ConfigError("--seeds must be positive");
        if (model.precision != "float32") throw ConfigError("experiment runs in float32 only");
        const auto log = parse_interactions(fs::path(data.interactions), data.schema());
        const auto graph = load_edge_list(fs::path(edges), log.n_skills);
        out << "data: " << log.records.size() << " records, " << log.n_skills << " skills; graph: "
            << graph.edge_count() << " edges\n";

        ExperimentConfig config;
        config.model = model.config;
        config.train = train.train;
        config.walk = walk.walk;
        config.split = train.spec();
        config.config_echo = echo;
        config.seeds.clear();
        for (int s = 0; s < seeds; ++s) config.seeds.push_back(static_cast<std::uint64_t>(s));
        config.fractions = parse_fractions(fractions);

        const ExperimentData input{log.records, log.n_skills};
        auto progress = [&](const CellResult& c) {
            out << "cell fraction " << c.fraction << " arm " << arm_name(c.arm) << " seed " << c.seed << " auc "
                << c.auc << " epochs " << c.epochs_run << std::endl;
        };

        std::vector<CellResult> cells;
        const bool ablation = mode != "limited";
        if (ablation) {
            config.arms = arms.empty() ? std::vector<Arm>{Arm::no_projection, Arm::random_graph, Arm::ours}
                                       : parse_arms(arms);
            cells = run_ablation_suite(input, graph, config, progress);
        }
        if (mode != "ablation") {
            config.arms = arms.empty() ? std::vector<Arm>{Arm::no_projection, Arm::ours} : parse_arms(arms);
            // Full-data cells equal the ablation cells with the same seed; reuse them.
            if (ablation) std::erase(config.fractions, 1.0);
            if (!config.fractions.empty()) {
                auto limited = run_limited_data_study(input, graph, config, progress);
                cells.insert(cells.end(), limited.begin(), limited.end());
            }
        }
        std::stable_sort(cells.begin(), cells.end(),
                         [](const CellResult& a, const CellResult& b) { return a.fraction < b.fraction; });

        std::ostringstream tsv;
        write_grid(cells, tsv);
        const auto grid_path = output_path(grid);
        write_text(grid_path, tsv.str());
        write_echo(grid_path, echo);
        const auto summary_path = output_path(summary);
        write_text(summary_path, summary_document(cells, echo).dump(2) + "\n");
        const auto text = format_arm_table(cells);
        if (!table.empty()) write_text(output_path(table), text);
        out << text;
        return exit_ok;
    }
};

template <class Command>
CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, Command& cmd,
                      std::unique_ptr<Binder>& binder)
{
    auto* sub = app.add_subcommand(name, help);
    binder = std::make_unique<Binder>(sub);
    cmd.bind(*binder);
    return sub;
}

/// Moves `--config <path>` into the argument list as --key=value pairs placed before the user's own flags.
std::vector<std::string> expand_config(std::vector<std::string> args)
{
    if (args.empty()) return args;
    std::vector<std::string> user;
    std::vector<std::string> from_file;
    for (std::size_t i = 1; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw ConfigError("--config needs a path");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            user.push_back(args[i]);
            continue;
        }
        auto pairs = read_config_file(path);
        from_file.insert(from_file.end(), pairs.begin(), pairs.end());
    }
    std::vector<std::string> merged{args[0]};
    merged.insert(merged.end(), from_file.begin(), from_file.end());
    merged.insert(merged.end(), user.begin(), user.end());
    return merged;
}

} // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Graph-informed knowledge tracing", "skillkt"};
    app.require_subcommand(1);

    EmbedCommand embed;
    TrainCommand train;
    EvalCommand eval;
    ExperimentCommand experiment;
    SynthCommand synth;
    std::unique_ptr<Binder> b_embed, b_train, b_eval, b_experiment, b_synth;
    auto* c_embed = add_command(app, "embed", "Skill2Vec vectors from a skill graph", embed, b_embed);
    auto* c_train = add_command(app, "train", "train a model and write a checkpoint", train, b_train);
    auto* c_eval = add_command(app, "eval", "pooled AUC of a checkpoint", eval, b_eval);
    auto* c_experiment = add_command(app, "experiment", "ablation and limited-data studies", experiment, b_experiment);
    auto* c_synth = add_command(app, "synth", "synthetic interactions and their cluster graph", synth, b_synth);

    try {
        args = expand_config(std::move(args));
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }

    try {
        if (c_embed->parsed()) return embed.run(b_embed->echo(), out);
        if (c_train->parsed()) return train.run(b_train->echo(), out, err);
        if (c_eval->parsed()) return eval.run(b_eval->echo(), out, err);
        if (c_experiment->parsed()) return experiment.run(b_experiment->echo(), out, err);
        if (c_synth->parsed()) return synth.run(b_synth->echo(), out);
    } catch (const UndefinedMetricError& e) {
        err << "error: " << e.what() << " (AUC needs both correct and incorrect responses in the evaluated data)\n";
        return exit_undefined_metric;
    } catch (const NumericalError& e) {
        err << "error: numerical failure: " << e.what() << '\n';
        return exit_numeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const json::exception& e) {
        err << "error: malformed metadata: " << e.what() << '\n';
        return exit_usage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}

} // namespace skillkt::cli
