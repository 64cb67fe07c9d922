#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "csnake/config.hpp"

using namespace csnake;

namespace {

const char* kReferenceConfig = R"(
model: 'coco'
network: 'ro_34'     # Syntax: arch_numOfLayers
task: 'circle_snake' # Determines which network to call
resume: false
gpus: (0,) # Must be a tuple

train:
    optim: 'adam'
    lr: 2.5e-4
    milestones: (60, 80, 100, 150)
    gamma: 0.5
    batch_size: 1
    dataset: 'eoeTrain' # Change this to your dataset
    num_workers: 1
    epoch: 200
    weight_decay: 0.0
test:
    dataset: 'eoeTest' # Change this to your dataset
    batch_size: 1

heads: {'ct_hm': 4, 'radius': 1, 'reg': 2}
segm_or_bbox: 'segm'
ct_score: 0.05
save_ep: 5
eval_ep: 5
)";

}  // namespace

TEST(Config, ParsesReferenceLayout) {
    auto cfg = parse_config(kReferenceConfig);
    EXPECT_EQ(cfg.model, "coco");
    EXPECT_EQ(cfg.network, "ro_34");
    EXPECT_EQ(cfg.task, "circle_snake");
    EXPECT_FALSE(cfg.resume);
    EXPECT_EQ(cfg.optim, "adam");
    EXPECT_DOUBLE_EQ(cfg.lr, 2.5e-4);
    EXPECT_EQ(cfg.milestones, (std::vector<int>{60, 80, 100, 150}));
    EXPECT_DOUBLE_EQ(cfg.gamma, 0.5);
    EXPECT_EQ(cfg.batch_size, 1);
    EXPECT_EQ(cfg.train_dataset, "eoeTrain");
    EXPECT_EQ(cfg.epochs, 200);
    EXPECT_DOUBLE_EQ(cfg.weight_decay, 0.0);
    EXPECT_EQ(cfg.test_dataset, "eoeTest");
    EXPECT_EQ(cfg.heads_ct_hm, 4);
    EXPECT_EQ(cfg.heads_radius, 1);
    EXPECT_EQ(cfg.heads_reg, 2);
    EXPECT_EQ(cfg.class_count(), 4);
    EXPECT_EQ(cfg.segm_or_bbox, "segm");
    EXPECT_DOUBLE_EQ(cfg.ct_score, 0.05);
    EXPECT_EQ(cfg.save_ep, 5);
    EXPECT_EQ(cfg.eval_ep, 5);
}

TEST(Config, UnknownKeyIsAnError) {
    try {
        parse_config("ct_scote: 0.05\n");
        FAIL() << "expected rejection";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("ct_scote"), std::string::npos);
    }
    EXPECT_THROW(parse_config("train:\n    lrr: 1.0\n"), IoError);
}

TEST(Config, SerializeParseIdentity) {
    auto cfg = parse_config(kReferenceConfig);
    cfg.ct_score = 0.2;
    cfg.milestones = {10, 20};
    auto text = serialize_config(cfg);
    auto cfg2 = parse_config(text);
    EXPECT_EQ(serialize_config(cfg2), text);
}

TEST(Config, OverridesMatchRunParameterStyle) {
    auto cfg = parse_config(kReferenceConfig);
    apply_overrides(cfg, {"model", "CircleNet_eoe", "train.dataset", "eosTrain", "test.dataset", "eosTest",
                          "pretrain", "ctdet_coco_dla_2x_converted", "debug_train", "False", "train.batch_size",
                          "16"});
    EXPECT_EQ(cfg.model, "CircleNet_eoe");
    EXPECT_EQ(cfg.train_dataset, "eosTrain");
    EXPECT_EQ(cfg.test_dataset, "eosTest");
    EXPECT_EQ(cfg.batch_size, 16);
    EXPECT_FALSE(cfg.debug);
    // pretrain is accepted for compatibility but warned about
    ASSERT_FALSE(cfg.warnings.empty());
    EXPECT_NE(cfg.warnings[0].find("pretrain"), std::string::npos);

    apply_overrides(cfg, {"test.epoch", "49", "ct_score", "0.2", "segm_or_bbox", "segm", "dice", "True",
                          "save_images", "True", "rotate_reproduce", "False"});
    EXPECT_EQ(cfg.test_epoch, 49);
    EXPECT_DOUBLE_EQ(cfg.ct_score, 0.2);
    EXPECT_TRUE(cfg.dice);
    EXPECT_TRUE(cfg.save_images);
}

TEST(Config, OddOverrideCountRejected) {
    auto cfg = parse_config(kReferenceConfig);
    EXPECT_THROW(apply_overrides(cfg, {"ct_score"}), IoError);
    EXPECT_THROW(apply_overrides(cfg, {"nonsense_key", "1"}), IoError);
}

TEST(Config, ValidationCatchesBadHeads) {
    EXPECT_THROW(parse_config("heads: {'ct_hm': 4, 'radius': 2, 'reg': 2}\n"), IoError);
    EXPECT_THROW(parse_config("heads: {'ct_hm': 4, 'radius': 1, 'reg': 3}\n"), IoError);
    EXPECT_THROW(parse_config("save_ep: 0\n"), IoError);
    EXPECT_THROW(parse_config("train:\n    optim: 'sgd'\n"), IoError);
}

TEST(Config, TupleEdgeCases) {
    auto cfg = parse_config("train:\n    milestones: (5,)\n");
    EXPECT_EQ(cfg.milestones, (std::vector<int>{5}));
    EXPECT_THROW(parse_config("train:\n    milestones: 5, 6\n"), IoError);
}

TEST(Registry, SaveLoadResolve) {
    DatasetRegistry reg;
    reg["eoeTrain"] = {"coco", "/data/train", "/data/train.json", "train"};
    reg["eoeVal"] = {"coco", "/data/val", "/data/val.json", "test"};
    reg["eoeTest"] = {"coco_test", "/data/test", "/data/test.json", "test"};
    auto path = std::filesystem::temp_directory_path() / "csnake_registry_test.json";
    save_registry(reg, path.string());
    auto rd = load_registry(path.string());
    ASSERT_EQ(rd.size(), 3u);
    EXPECT_EQ(rd["eoeTrain"].data_root, "/data/train");
    EXPECT_EQ(rd["eoeTest"].id, "coco_test");
    EXPECT_EQ(resolve_dataset(rd, "eoeVal").ann_file, "/data/val.json");
    EXPECT_THROW(resolve_dataset(rd, "missing"), IoError);
    std::filesystem::remove(path);
}

TEST(Registry, MalformedFileRejected) {
    auto path = std::filesystem::temp_directory_path() / "csnake_registry_bad.json";
    std::ofstream(path.string()) << "{\"x\": {\"data_root\": \"r\"}}";
    EXPECT_THROW(load_registry(path.string()), IoError);
    std::filesystem::remove(path);
}
