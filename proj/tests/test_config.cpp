#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "symreach/config.hpp"

using namespace symreach;
using namespace symreach::config;

namespace fs = std::filesystem;

namespace {

fs::path write_ini(const std::string& name, const std::string& text) {
    const fs::path p = fs::temp_directory_path() / ("symreach_test_" + name + ".ini");
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST_CASE("defaults follow the table of training parameters") {
    const RunConfig c;
    CHECK(c.train.gamma == 0.99);
    CHECK(c.train.sigma == 0.1);
    CHECK(c.train.n_tau == 400);
    CHECK(c.train.n_ep == 250);
    CHECK(c.train.batch_o == 100);
    CHECK(c.train.batch_d == 100);
    CHECK(c.train.omega == 0.995);
    CHECK(c.train.buffer_o == 1'000'000);
    CHECK(c.env.reward.epsilon == 0.05);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("every known key reads back what was set") {
    RunConfig c;
    for (const std::string& key : known_keys()) {
        const std::string v = get_value(c, key);
        CAPTURE(key);
        CHECK_NOTHROW(set_value(c, key, v));
        CHECK(get_value(c, key) == v);
    }
}

TEST_CASE("unknown and malformed values are hard errors") {
    RunConfig c;
    CHECK_THROWS_WITH_AS(set_value(c, "train.gama", "0.9"), doctest::Contains("train.gama"), ConfigError);
    CHECK_THROWS_AS(set_value(c, "train.gamma", "abc"), ConfigError);
    CHECK_THROWS_AS(set_value(c, "train.n_up", "2.5"), ConfigError);
    CHECK_THROWS_AS(set_value(c, "run.task", "P2Q"), ConfigError);
    CHECK_THROWS_AS(apply_overrides(c, {"train.gamma"}), ConfigError);
    CHECK_THROWS_AS(apply_preset(c, "no-such-preset"), ConfigError);
}

TEST_CASE("validation names the field") {
    RunConfig c;
    c.train.gamma = 1.5;
    CHECK_THROWS_WITH(c.validate(), doctest::Contains("gamma"));
    RunConfig d;
    d.env.workspace.partitions = 3;
    CHECK_THROWS_WITH(d.validate(), doctest::Contains("partitions"));
}

TEST_CASE("config file layering and unknown keys") {
    RunConfig c;
    const fs::path good = write_ini("good", "[train]\ngamma = 0.95\nactor_hidden = 32,16\n[run]\ntask = p2p-o\n");
    load_file(c, good);
    CHECK(c.train.gamma == 0.95);
    CHECK(c.train.actor_hidden == std::vector<int>{32, 16});
    CHECK(c.task == env::TaskKind::P2PO);

    const fs::path bad = write_ini("bad", "[train]\ngamma = 0.95\nlearning_rate = 1\n");
    CHECK_THROWS_WITH_AS(load_file(c, bad), doctest::Contains("train.learning_rate"), ConfigError);
    const fs::path bad_section = write_ini("bad_section", "[trainer]\ngamma = 0.95\n");
    CHECK_THROWS_AS(load_file(c, bad_section), ConfigError);
    CHECK_THROWS_AS(load_file(c, "/nonexistent/symreach.ini"), ConfigError);
    fs::remove(good);
    fs::remove(bad);
    fs::remove(bad_section);
}

TEST_CASE("snapshot round-trips every key exactly") {
    RunConfig c;
    apply_preset(c, "p2po-full");
    apply_overrides(c, {"train.lr_actor=0.000123456789012345", "robot.dt=0.05", "train.target_max=12.5"});
    const fs::path p = write_ini("snapshot", snapshot(c));
    RunConfig d;
    load_file(d, p);
    for (const std::string& key : known_keys()) {
        CAPTURE(key);
        CHECK(get_value(d, key) == get_value(c, key));
    }
    CHECK(d.train.lr_actor == 0.000123456789012345);
    CHECK(snapshot(d) == snapshot(c));
    fs::remove(p);
}

TEST_CASE("infinite target bounds survive the snapshot") {
    const RunConfig c;
    const fs::path p = write_ini("inf", snapshot(c));
    RunConfig d;
    d.train.target_max = 3.0;
    load_file(d, p);
    CHECK(std::isinf(d.train.target_max));
    CHECK(d.train.target_min < 0);
    fs::remove(p);
}

TEST_CASE("presets set the documented scale and validate") {
    for (const std::string& name : preset_names()) {
        RunConfig c;
        apply_preset(c, name);
        CAPTURE(name);
        CHECK_NOTHROW(c.validate());
    }
    RunConfig p2p;
    apply_preset(p2p, "p2p-full");
    CHECK(p2p.task == env::TaskKind::P2P);
    CHECK(p2p.train.n_tau == 400);
    CHECK(p2p.train.n_ep == 250);
    CHECK(p2p.train.n_up == 20);

    RunConfig p2po;
    apply_preset(p2po, "p2po-full");
    CHECK(p2po.task == env::TaskKind::P2PO);
    CHECK(p2po.train.n_tau == 500);
    CHECK(p2po.train.n_ep == 500);
    CHECK(p2po.train.n_up == 25);

    RunConfig desk;
    apply_preset(desk, "p2p-desk");
    CHECK(desk.train.n_tau == 100);
    CHECK(desk.train.total_episodes() == 400);
    CHECK(desk.train.n_demos == 40);
    CHECK(desk.train.lambda_bc == 1.0);
    CHECK(desk.train.gamma == 0.95);
    CHECK(desk.train.target_max == 10.0);

    RunConfig ddpg;
    apply_preset(ddpg, "p2p-ddpg");
    CHECK(ddpg.train.n_demos == 0);
    CHECK(ddpg.train.lambda_bc == 0.0);
}

TEST_CASE("later layers win") {
    RunConfig c;
    apply_preset(c, "p2p-full");
    const fs::path p = write_ini("layer", "[train]\nn_up = 7\n");
    load_file(c, p);
    apply_overrides(c, {"train.n_up=9", "train.n_up=11"});
    CHECK(c.train.n_up == 11);
    CHECK(c.train.n_tau == 400);  // untouched by later layers
    fs::remove(p);
}

TEST_CASE("environment horizon follows the episode length") {
    RunConfig c;
    c.train.n_tau = 123;
    CHECK(c.env_params().max_steps == 123);
}
