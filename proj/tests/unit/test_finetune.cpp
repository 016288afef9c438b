#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vvgen/error.hpp"
#include "vvgen/finetune_dataset.hpp"

using namespace vvgen;

namespace {

struct Corpus {
  std::string text = fixtures::sample_spec_text();
  SpecIndex index = slice_sections(text, parse_toc(text));
  LocalHashEmbedder embedder;
  VectorStore store = build_store(text, embedder, 150, 30);
};

std::string planted_spec() {
  std::string long_body;
  for (int i = 0; i < 6; ++i) long_body += "device memory lifetime words repeated here ";
  long_body += "quasarflux ";
  for (int i = 0; i < 6; ++i) long_body += "structured block region data words again ";
  auto text = fixtures::sample_spec_text();
  const auto at = text.find("The data construct defines");
  text.insert(at, long_body + "\n");
  return text;
}

}  // namespace

TEST(FeatureTag, ParsesHeaderComment) {
  EXPECT_EQ(feature_tag("// T1:parallel,V:2.7-3.3\nint main(){}"), "parallel");
  EXPECT_EQ(feature_tag("!T1:kernels-if, V:2.7-3.3\nprogram p"), "kernels-if");
  EXPECT_EQ(feature_tag("int main(){}"), "");
}

TEST(PairTest, HintByKeyTitleOrStem) {
  Corpus c;
  EXPECT_EQ(pair_test_with_section("x", "2.5.2", c.index, c.store, c.embedder), "2.5.2");
  EXPECT_EQ(pair_test_with_section("x", "Serial Construct", c.index, c.store, c.embedder), "2.5.2");
  EXPECT_EQ(pair_test_with_section("x", "serial", c.index, c.store, c.embedder), "2.5.2");
  EXPECT_EQ(pair_test_with_section("x", "num-gangs", c.index, c.store, c.embedder), "2.5.10");
  EXPECT_EQ(pair_test_with_section("x", "num_workers", c.index, c.store, c.embedder), "2.5.11");
}

TEST(PairTest, PlantedTokenFindsItsSection) {
  const auto text = planted_spec();
  const auto index = slice_sections(text, parse_toc(text));
  LocalHashEmbedder e;
  const auto store = build_store(text, e, 60, 10);
  const std::string source = "quasarflux";
  EXPECT_EQ(pair_test_with_section(source, "", index, store, e), "2.6.5");

  // Brute-force oracle: the best chunk by direct cosine lies inside 2.6.5.
  const auto q = e.embed(source);
  const StoreEntry* best = nullptr;
  double best_score = -2;
  for (const auto& entry : store.entries()) {
    double dot = 0;
    for (std::size_t i = 0; i < q.dims(); ++i) dot += q.values[i] * entry.vector.values[i];
    if (dot > best_score) {
      best_score = dot;
      best = &entry;
    }
  }
  ASSERT_NE(best, nullptr);
  const auto& section = lookup_section(index, "2.6.5");
  EXPECT_GE(best->span.start, section.span.start);
  EXPECT_LE(best->span.end, section.span.end);
  EXPECT_NE(best->text.find("quasarflux"), std::string::npos);
}

TEST(PairTest, WithoutStoreComparesSections) {
  Corpus c;
  EXPECT_EQ(pair_test_with_section("acc_get_num_devices attached devices device type", "", c.index,
                                   VectorStore("empty"), c.embedder),
            "3.2.1");
  EXPECT_THROW(pair_test_with_section("x", "", SpecIndex{}, c.store, c.embedder), Error);
}

TEST(BuildDataset, ThreeLanguagesWithSidecar) {
  Corpus c;
  fixtures::TempDir dir;
  write_file(dir / "c/serial.c", "int main(){ return 0; }\n");
  write_file(dir / "cpp/workers.cpp", "// T1:num_workers,V:2.7-3.3\nint main(){ return 0; }\n");
  write_file(dir / "f/devices.F90", "program p\n  call exit(0)\nend program p\n");
  write_file(dir / "notes.txt", "ignored");
  write_file(dir / "features.json", R"({"c/serial.c": "2.5.2", "devices.F90": "acc_get_num_devices"})");
  std::vector<std::string> warnings;
  DatasetOptions opts;
  opts.warn = [&](const std::filesystem::path& p, const std::string&) { warnings.push_back(p.string()); };
  const auto ds = build_dataset(dir.path(), c.index, c.store, c.embedder, opts);
  ASSERT_EQ(ds.examples.size(), 3u);
  EXPECT_TRUE(warnings.empty());
  EXPECT_EQ(ds.section_keys, (std::vector<std::string>{"2.5.2", "2.5.11", "3.2.1"}));
  EXPECT_EQ(ds.manifest.total, 3u);
  EXPECT_EQ(ds.manifest.per_language.at(Language::C), 1u);
  EXPECT_EQ(ds.manifest.per_language.at(Language::Cpp), 1u);
  EXPECT_EQ(ds.manifest.per_language.at(Language::Fortran), 1u);
  EXPECT_EQ(ds.manifest.spec_digest, c.index.source_digest());
  EXPECT_EQ(ds.examples[0].prompt,
            "Write a code in C to verify compiler implementation of the OpenACC specification of serial construct."
            "\n\nContext: " +
                lookup_section(c.index, "2.5.2").body + "\n");
  EXPECT_EQ(ds.examples[2].completion, "program p\n  call exit(0)\nend program p\n");

  DatasetOptions chunks;
  chunks.context = FinetuneContext::Chunks;
  chunks.top_k = 2;
  const auto ds2 = build_dataset(dir.path(), c.index, c.store, c.embedder, chunks);
  EXPECT_EQ(ds2.section_keys, ds.section_keys);
  EXPECT_NE(ds2.examples[0].prompt, ds.examples[0].prompt);
}

TEST(BuildDataset, EmptyDirAndEmptyFiles) {
  Corpus c;
  fixtures::TempDir dir;
  EXPECT_EQ(build_dataset(dir.path(), c.index, c.store, c.embedder).manifest.total, 0u);
  write_file(dir / "empty.c", "");
  int warned = 0;
  DatasetOptions opts;
  opts.warn = [&](const std::filesystem::path&, const std::string&) { ++warned; };
  EXPECT_TRUE(build_dataset(dir.path(), c.index, c.store, c.embedder, opts).examples.empty());
  EXPECT_EQ(warned, 1);
  EXPECT_THROW(build_dataset(dir / "missing", c.index, c.store, c.embedder), Error);
}

TEST(Jsonl, KeyOrderEscapingRoundTrip) {
  const std::vector<FinetuneExample> ex{
      {"Write \"quoted\"\ttab", "int main(){\n  printf(\"%d\\n\", 1);\n  return 0;\n}\n"},
      {"unicode \xC3\xA9 and backslash \\", ""},
  };
  const auto text = to_jsonl(ex);
  std::size_t lines = 0;
  for (std::size_t pos = 0; (pos = text.find('\n', pos)) != std::string::npos; ++pos) ++lines;
  EXPECT_EQ(lines, 2u);
  EXPECT_EQ(text.rfind("{\"prompt\":", 0), 0u);
  const auto second = text.substr(text.find('\n') + 1);
  EXPECT_EQ(second.rfind("{\"prompt\":", 0), 0u);
  EXPECT_LT(text.find("\"prompt\""), text.find("\"completion\""));
  EXPECT_EQ(parse_jsonl(text), ex);

  fixtures::TempDir dir;
  emit_jsonl(ex, dir / "d.jsonl");
  EXPECT_EQ(parse_jsonl(read_file(dir / "d.jsonl")), ex);
}
