/** Word-level tokenizer: lowercase, split on non-alphanumeric runs. */

export const CLS_TOKEN = "[CLS]";
export const UNK_TOKEN = "[UNK]";

// Catalog rows may have empty descriptions; they encode as this literal text.
export const EMPTY_TEXT = "unknown item";

export type Vocab = Record<string, number>;

export function wordTokens(text: string): string[] {
  return text.toLowerCase().split(/[^a-z0-9]+/).filter((w) => w.length > 0);
}

/**
 * Map text to token ids: classifier token first, out-of-vocabulary words
 * as the unknown token, then hard-truncate to maxTokens.
 */
export function encodeText(text: string, vocab: Vocab, maxTokens: number): number[] {
  let words = wordTokens(text);
  if (words.length === 0) {
    words = wordTokens(EMPTY_TEXT);
  }
  const unk = vocab[UNK_TOKEN];
  const ids = [vocab[CLS_TOKEN]];
  for (const w of words) {
    ids.push(vocab[w] ?? unk);
  }
  return ids.slice(0, maxTokens);
}
