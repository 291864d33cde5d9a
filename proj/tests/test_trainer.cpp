#include <doctest.h>

#include <cmath>

#include "skillkt/errors.hpp"
#include "skillkt/synthetic.hpp"
#include "skillkt/trainer.hpp"

using namespace skillkt;

namespace {

ModelConfig tiny_model(double lambda = 0.0)
{
    ModelConfig c;
    c.d_model = 16;
    c.n_heads = 2;
    c.n_encoder_layers = 1;
    c.n_decoder_layers = 1;
    c.feedforward_dim = 32;
    c.skill_dim = 4;
    c.max_len = 50;
    c.lambda = lambda;
    return c;
}

struct Fixture
{
    std::vector<Batch> train;
    std::vector<Batch> eval;
    std::vector<StudentSequence> eval_sequences;
    NodeId n = 16;
};

Fixture fixture(std::uint64_t seed = 0, int students = 30)
{
    SynthConfig sc;
    sc.n_students = students;
    sc.interactions_per_student = 50;
    sc.seed = seed;
    const auto data = synthesize_students(sc);
    const auto split = split_records(data.records, SplitSpec{});
    Fixture f;
    f.train = make_batches(build_sequences(split.train, 50), f.n, 50, 8);
    f.eval_sequences = build_sequences(split.eval, 50);
    f.eval = make_batches(f.eval_sequences, f.n, 50, 8);
    return f;
}

EmbeddingTable skill_table(Index n, Index dim, double fill)
{
    EmbeddingTable t;
    t.vectors = Matrix<double>::Constant(n, dim, fill);
    for (Index i = 0; i < n; ++i) t.vectors(i, i % dim) += 1.0;
    return t;
}

TrainConfig quick(int epochs)
{
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 8;
    c.learning_rate = 1e-3;
    c.patience = 100;
    return c;
}

} // namespace

TEST_CASE("train config defaults and validation")
{
    const TrainConfig defaults;
    CHECK(defaults.epochs == 100);
    CHECK(defaults.patience == 10);
    auto c = defaults;
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = defaults;
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("same seed gives the same run")
{
    const auto f = fixture();
    KTModel<float> a(tiny_model(), f.n, 3), b(tiny_model(), f.n, 3);
    auto cfg = quick(3);
    cfg.seed = 9;
    const auto ra = train(a, std::span<const Batch>(f.train), f.eval, nullptr, cfg);
    const auto rb = train(b, std::span<const Batch>(f.train), f.eval, nullptr, cfg);
    REQUIRE(ra.epochs.size() == rb.epochs.size());
    for (std::size_t i = 0; i < ra.epochs.size(); ++i) {
        CHECK(ra.epochs[i].train_kt_loss == rb.epochs[i].train_kt_loss);
        CHECK(ra.epochs[i].eval_auc == rb.epochs[i].eval_auc);
    }
    for (const auto& [name, t] : a.parameters()) CHECK(t.matrix() == b.parameters().at(name).matrix());

    KTModel<float> c(tiny_model(), f.n, 3);
    cfg.seed = 10;
    const auto rc = train(c, std::span<const Batch>(f.train), f.eval, nullptr, cfg);
    CHECK(rc.epochs[0].train_kt_loss != ra.epochs[0].train_kt_loss);
}

TEST_CASE("best parameters are restored")
{
    const auto f = fixture(1);
    KTModel<double> model(tiny_model(), f.n, 2);
    const auto r = train(model, std::span<const Batch>(f.train), f.eval, nullptr, quick(6));
    CHECK(r.epochs_run == 6);
    CHECK(r.best_auc >= r.final_auc);
    CHECK(r.best_epoch >= 1);
    CHECK(r.epochs.at(r.best_epoch - 1).eval_auc == r.best_auc);
    CHECK(evaluate(model, std::span<const Batch>(f.eval)) == r.best_auc);
    CHECK(all_finite(model.parameters()));
}

TEST_CASE("training lowers the training loss")
{
    const auto f = fixture(2);
    KTModel<float> model(tiny_model(), f.n, 4);
    auto cfg = quick(8);
    cfg.learning_rate = 3e-3;
    const auto r = train(model, std::span<const Batch>(f.train), {}, nullptr, cfg);
    CHECK(r.epochs.back().train_kt_loss < r.epochs.front().train_kt_loss);
    CHECK(std::isnan(r.best_auc));
}

TEST_CASE("projection loss is logged only when lambda is positive")
{
    const auto f = fixture();
    const auto skills = skill_table(f.n, 4, 0.1);
    KTModel<float> off(tiny_model(0.0), f.n, 1);
    const auto r0 = train(off, std::span<const Batch>(f.train), f.eval, nullptr, quick(1));
    CHECK_FALSE(r0.epochs.at(0).train_projection_loss);

    KTModel<float> on(tiny_model(1.0), f.n, 1);
    const auto r1 = train(on, std::span<const Batch>(f.train), f.eval, &skills, quick(1));
    REQUIRE(r1.epochs.at(0).train_projection_loss);
    CHECK(*r1.epochs[0].train_projection_loss > 0.0);
}

TEST_CASE("skill vectors are checked only when used")
{
    const auto f = fixture();
    KTModel<float> model(tiny_model(1.0), f.n, 1);
    CHECK_THROWS_AS(train(model, std::span<const Batch>(f.train), f.eval, nullptr, quick(1)), ConfigError);
    const auto narrow = skill_table(f.n, 3, 0.0);
    CHECK_THROWS_AS(train(model, std::span<const Batch>(f.train), f.eval, &narrow, quick(1)), ConfigError);
    const auto short_table = skill_table(f.n - 1, 4, 0.0);
    CHECK_THROWS_AS(train(model, std::span<const Batch>(f.train), f.eval, &short_table, quick(1)), ConfigError);

    KTModel<float> plain(tiny_model(0.0), f.n, 1);
    CHECK_NOTHROW(train(plain, std::span<const Batch>(f.train), f.eval, &narrow, quick(1)));
    CHECK_THROWS_AS(train(plain, std::span<const Batch>(), f.eval, nullptr, quick(1)), ConfigError);
}

TEST_CASE("a non-finite loss aborts and keeps finite parameters")
{
    const auto f = fixture();
    auto skills = skill_table(f.n, 4, 0.0);
    skills.vectors(3, 1) = std::numeric_limits<double>::quiet_NaN();
    KTModel<float> model(tiny_model(1.0), f.n, 1);
    const auto before = model.parameters();
    try {
        train(model, std::span<const Batch>(f.train), f.eval, &skills, quick(2));
        FAIL("expected TrainingAborted");
    } catch (const TrainingAborted& e) {
        CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
        CHECK(e.partial().epochs_run == 0);
    }
    CHECK(all_finite(model.parameters()));
    CHECK(model.parameters().size() == before.size());
}

TEST_CASE("evaluation cadence and early stopping")
{
    const auto f = fixture(3);
    KTModel<float> model(tiny_model(), f.n, 5);
    auto cfg = quick(7);
    cfg.eval_every = 3;
    const auto r = train(model, std::span<const Batch>(f.train), f.eval, nullptr, cfg);
    for (const auto& m : r.epochs) CHECK(m.eval_auc.has_value() == (m.epoch % 3 == 0 || m.epoch == 7));

    KTModel<float> eager(tiny_model(), f.n, 5);
    cfg = quick(40);
    cfg.patience = 1;
    cfg.learning_rate = 5e-2;
    const auto s = train(eager, std::span<const Batch>(f.train), f.eval, nullptr, cfg);
    if (s.epochs_run < 40) CHECK(s.epochs_run - s.best_epoch == 1);
    CHECK(s.epochs_run - s.best_epoch <= 1);
}

TEST_CASE("callbacks and external optimizer state")
{
    const auto f = fixture();
    KTModel<float> model(tiny_model(), f.n, 1);
    AdamState<float> adam;
    int calls = 0;
    double best = -1.0;
    TrainCallbacks<float> cb;
    cb.on_epoch = [&](const KTModel<float>&, const AdamState<float>& state, const EpochMetrics& m, bool improved) {
        ++calls;
        CHECK(state.step == static_cast<std::int64_t>(calls * f.train.size()));
        CHECK(improved == (*m.eval_auc > best));
        if (improved) best = *m.eval_auc;
    };
    const auto r = train(model, std::span<const Batch>(f.train), f.eval, nullptr, quick(3), &adam, cb);
    CHECK(calls == 3);
    CHECK(best == r.best_auc);
    CHECK(adam.config.learning_rate == 1e-3);
}

TEST_CASE("a stop hook ends training early")
{
    const auto f = fixture();
    KTModel<float> model(tiny_model(), f.n, 1);
    TrainCallbacks<float> cb;
    cb.stop = [](const KTModel<float>&, const EpochMetrics& m) { return m.epoch == 2; };
    const auto r = train<float>(model, f.train, f.eval, nullptr, quick(10), nullptr, cb);
    CHECK(r.epochs_run == 2);
    CHECK(r.epochs.size() == 2);
}

TEST_CASE("untrained models score chance AUC")
{
    SynthConfig sc;
    sc.n_students = 200;
    sc.interactions_per_student = 50;
    sc.ability_sd = 0.0;
    sc.difficulty_sd = 0.0;
    sc.learning_rate = 0.0;
    const auto data = synthesize_students(sc);
    const auto batches = make_batches(build_sequences(data.records, 50), 16, 50, 32);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const KTModel<float> model(tiny_model(), 16, seed);
        CHECK(std::abs(evaluate(model, std::span<const Batch>(batches)) - 0.5) < 0.05);
    }
}

TEST_CASE("evaluation ignores how sequences are padded")
{
    const auto f = fixture(4);
    const KTModel<double> model(tiny_model(), f.n, 6);
    const auto singles = make_batches(f.eval_sequences, f.n, 50, 1);
    const auto pooled = make_batches(f.eval_sequences, f.n, 50, 64);
    const auto a = pool_predictions(model, std::span<const Batch>(singles));
    const auto b = pool_predictions(model, std::span<const Batch>(pooled));
    REQUIRE(a.scores.size() == b.scores.size());
    CHECK(a.labels == b.labels);
    for (std::size_t i = 0; i < a.scores.size(); ++i) CHECK(a.scores[i] == doctest::Approx(b.scores[i]).epsilon(1e-12));
    CHECK(evaluate(model, std::span<const Batch>(singles))
          == doctest::Approx(evaluate(model, std::span<const Batch>(pooled))).epsilon(1e-12));
}
