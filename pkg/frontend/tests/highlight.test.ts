import { describe, expect, it } from "vitest";

import { splitAtSpan } from "../src/highlight.js";

describe("splitAtSpan", () => {
  it("splits by exact character offsets", () => {
    const text = "He hits classmates. He skips homework.";
    expect(splitAtSpan(text, 20, 38)).toEqual({
      before: "He hits classmates. ",
      marked: "He skips homework.",
      after: "",
    });
  });

  it("handles a span covering the whole text", () => {
    expect(splitAtSpan("abc", 0, 3)).toEqual({ before: "", marked: "abc", after: "" });
  });

  it("counts code points, matching the service's span units", () => {
    // emoji occupy two UTF-16 units but one code point; a naive slice of
    // such text would misplace every span after the emoji
    const text = "note 😀 他喜欢表扬。 end";
    const start = Array.from(text).indexOf("他");
    expect(splitAtSpan(text, start, start + 6).marked).toBe("他喜欢表扬。");
  });

  it("reassembles the original text", () => {
    const text = "One. Two. Three.";
    const { before, marked, after } = splitAtSpan(text, 5, 9);
    expect(before + marked + after).toBe(text);
    expect(marked).toBe("Two.");
  });

  it("rejects out-of-bounds and inverted spans", () => {
    expect(() => splitAtSpan("short", 0, 99)).toThrow(RangeError);
    expect(() => splitAtSpan("short", -1, 2)).toThrow(RangeError);
    expect(() => splitAtSpan("short", 3, 2)).toThrow(RangeError);
    expect(() => splitAtSpan("short", 1.5, 3)).toThrow(RangeError);
  });
});
