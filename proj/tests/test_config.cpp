#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <string>

#include "config.hpp"
#include "errors.hpp"
#include "test_util.hpp"

using namespace turbperf;
using testutil::TempDir;
using testutil::write_file;

TEST_CASE("defaults are complete and valid") {
    RunConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.get("split.mode") == "random");
    CHECK(cfg.split_seed() == 42);
    CHECK(cfg.get_long("synth.n") == 29736);
    CHECK(cfg.get_double("svr.c") == 1.0);
    CHECK(cfg.get_bool("svr.auto_epsilon"));
    CHECK(cfg.get_long("nn.max_epochs") == 500);
    CHECK(cfg.out_dir() == "runs/default");
    CHECK(cfg.measure_time());
    CHECK(cfg.get("data.csv").empty()); // synthetic source by default
}

TEST_CASE("typed accessors map onto the structured views") {
    RunConfig cfg;
    cfg.set("turbine.cut_in", "4");
    cfg.set("turbine.rated_speed", "14");
    cfg.set("turbine.cut_out", "26");
    cfg.set("turbine.rated_power", "2.5");
    const TurbineSpec spec = cfg.turbine();
    CHECK(spec.cut_in == 4.0);
    CHECK(spec.rated_speed == 14.0);
    CHECK(spec.cut_out == 26.0);
    CHECK(spec.rated_power == 2.5);

    cfg.set("svr.c", "2.5");
    cfg.set("svr.epsilon", "0.05");
    cfg.set("svr.kernel_scale", "1.5");
    cfg.set("svr.max_passes", "123");
    const SvrHyper hyper = cfg.svr_hyper();
    CHECK(hyper.box_c == 2.5);
    CHECK(hyper.epsilon == 0.05);
    CHECK(hyper.kernel_scale == 1.5);
    CHECK(hyper.max_passes == 123);

    cfg.set("split.train", "0.6");
    cfg.set("split.val", "0.2");
    cfg.set("split.test", "0.2");
    const SplitFractions f = cfg.fractions();
    CHECK(f.train == 0.6);
    CHECK(f.val == 0.2);
    CHECK(f.test == 0.2);

    cfg.set("split.mode", "chronological");
    CHECK(cfg.split_mode() == SplitMode::Chronological);

    cfg.set("synth.weibull_shape", "2.2");
    cfg.set("synth.autocorr", "0.5");
    CHECK(cfg.synth_params().weibull_shape == 2.2);
    CHECK(cfg.synth_params().autocorr == 0.5);
}

TEST_CASE("per-architecture keys inherit from the shared block when empty") {
    RunConfig cfg;
    cfg.set("nn.max_epochs", "44");
    cfg.set("nn.learning_rate", "0.02");
    CHECK(cfg.nn_train_config(ArchKind::Recurrent).max_epochs == 44);
    CHECK(cfg.nn_train_config(ArchKind::Convolutional).learning_rate == 0.02);

    cfg.set("nn.rnn.max_epochs", "7");
    CHECK(cfg.nn_train_config(ArchKind::Recurrent).max_epochs == 7);
    CHECK(cfg.nn_train_config(ArchKind::Feedforward).max_epochs == 44); // untouched

    cfg.set("nn.rnn.window", "6");
    cfg.set("nn.rnn.hidden", "10");
    const ArchOverrides ov = cfg.nn_arch_overrides(ArchKind::Recurrent);
    CHECK(ov.window == 6);
    CHECK(ov.hidden == 10);
    CHECK(cfg.nn_arch_overrides(ArchKind::Convolutional).window == 0); // sentinel

    cfg.set("nn.sae.rho", "0.1");
    cfg.set("nn.sae.beta", "1.5");
    CHECK(cfg.nn_arch_overrides(ArchKind::SparseAutoencoder).rho == 0.1);
    CHECK(cfg.nn_arch_overrides(ArchKind::SparseAutoencoder).beta == 1.5);

    cfg.set("nn.seed", "9");
    CHECK(cfg.nn_train_config(ArchKind::NarTimeSeries).seed == 9);
    cfg.set("nn.nar.seed", "10");
    CHECK(cfg.nn_train_config(ArchKind::NarTimeSeries).seed == 10);
}

TEST_CASE("unknown keys are rejected, with the line number when parsing text") {
    RunConfig cfg;
    try {
        cfg.set("svr.gamma", "1");
        FAIL("expected BadConfig");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::BadConfig);
        CHECK(std::string(e.what()).find("svr.gamma") != std::string::npos);
    }

    try {
        RunConfig::from_text("svr.c = 1\nnot_a_key = 2\n");
        FAIL("expected BadConfig");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos); // line number
        CHECK(std::string(e.what()).find("not_a_key") != std::string::npos);
    }

    CHECK_THROWS_AS(RunConfig::from_text("just some words\n"), Error);
}

TEST_CASE("comments and blank lines are ignored") {
    const RunConfig cfg = RunConfig::from_text(
        "# a comment\n"
        "\n"
        "svr.c = 3\n"
        "   # indented comment\n"
        "out.dir = runs/elsewhere\n");
    CHECK(cfg.get_double("svr.c") == 3.0);
    CHECK(cfg.out_dir() == "runs/elsewhere");
}

TEST_CASE("typed getters reject unparseable values") {
    RunConfig cfg;
    cfg.set("svr.c", "banana");
    CHECK_THROWS_AS(cfg.get_double("svr.c"), Error);
    cfg.set("synth.n", "1.5");
    CHECK_THROWS_AS(cfg.get_long("synth.n"), Error);
    cfg.set("report.measure_time", "maybe");
    CHECK_THROWS_AS(cfg.get_bool("report.measure_time"), Error);
}

TEST_CASE("validation catches bad values eagerly") {
    RunConfig cfg;
    cfg.set("split.train", "0.5");
    cfg.set("split.val", "0.3");
    cfg.set("split.test", "0.3"); // sums past one
    try {
        cfg.validate();
        FAIL("expected a config-class error");
    } catch (const Error& e) {
        CHECK(e.cls() == ErrClass::Config);
    }

    RunConfig turbine;
    turbine.set("turbine.cut_in", "20"); // above rated speed
    CHECK_THROWS_AS(turbine.validate(), Error);

    RunConfig nn;
    nn.set("nn.momentum", "1.0");
    CHECK_THROWS_AS(nn.validate(), Error);

    RunConfig arch;
    arch.set("nn.cnn.kernel_width", "99"); // wider than the window
    CHECK_THROWS_AS(arch.validate(), Error);
}

TEST_CASE("hash ignores the output directory but tracks everything else") {
    RunConfig a;
    RunConfig b;
    b.set("out.dir", "runs/somewhere-else");
    CHECK(a.hash() == b.hash());

    RunConfig c;
    c.set("svr.c", "2");
    CHECK(a.hash() != c.hash());

    // Hash is a hex string of stable width.
    CHECK(a.hash().size() == 16);
    CHECK(a.hash().find_first_not_of("0123456789abcdef") == std::string::npos);
}

TEST_CASE("render and from_text round-trip") {
    RunConfig cfg;
    cfg.set("svr.c", "2.5");
    cfg.set("split.mode", "chronological");
    cfg.set("nn.rnn.hidden", "24");
    const RunConfig back = RunConfig::from_text(cfg.render());
    CHECK(back.render() == cfg.render());
    CHECK(back.get("nn.rnn.hidden") == "24");
}

TEST_CASE("config files load, missing files are reported") {
    TempDir tmp;
    write_file(tmp.file("run.conf"), "svr.c = 4\nsynth.n = 100\n");
    const RunConfig cfg = RunConfig::from_file(tmp.file("run.conf"));
    CHECK(cfg.get_double("svr.c") == 4.0);
    CHECK(cfg.get_long("synth.n") == 100);

    try {
        RunConfig::from_file(tmp.file("absent.conf"));
        FAIL("expected MissingFile");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::MissingFile);
    }
}

TEST_CASE("environment override loses to explicit sets") {
    ::setenv("TURBPERF_OUT", "runs/from-env", 1);
    RunConfig cfg;
    cfg.apply_env();
    CHECK(cfg.out_dir() == "runs/from-env");
    cfg.set("out.dir", "runs/explicit"); // callers apply --set after apply_env
    CHECK(cfg.out_dir() == "runs/explicit");
    ::unsetenv("TURBPERF_OUT");

    RunConfig untouched;
    untouched.apply_env(); // variable now absent
    CHECK(untouched.out_dir() == "runs/default");
}

TEST_CASE("arch key prefixes use the short names") {
    CHECK(arch_key_prefix(ArchKind::Feedforward) == "nn.ff.");
    CHECK(arch_key_prefix(ArchKind::Recurrent) == "nn.rnn.");
    CHECK(arch_key_prefix(ArchKind::Convolutional) == "nn.cnn.");
    CHECK(arch_key_prefix(ArchKind::SparseAutoencoder) == "nn.sae.");
    CHECK(arch_key_prefix(ArchKind::NarTimeSeries) == "nn.nar.");
}
