// Span highlighting by character offsets, never by text search.
//
// The service reports spans as Python string offsets, which count Unicode
// code points; JavaScript string indexing counts UTF-16 code units. Slicing
// over a code-point array keeps the two aligned for any text.

export interface Segments {
  before: string;
  marked: string;
  after: string;
}

export function splitAtSpan(
  text: string,
  startChar: number,
  endChar: number,
): Segments {
  const points = Array.from(text);
  if (
    !Number.isInteger(startChar) ||
    !Number.isInteger(endChar) ||
    startChar < 0 ||
    endChar < startChar ||
    endChar > points.length
  ) {
    throw new RangeError(
      `span (${startChar}, ${endChar}) out of bounds for text of ${points.length} characters`,
    );
  }
  return {
    before: points.slice(0, startChar).join(""),
    marked: points.slice(startChar, endChar).join(""),
    after: points.slice(endChar).join(""),
  };
}
