import { beforeEach, describe, expect, it } from 'vitest';

import { App } from '../src/main.js';
import { FakeServer, figure4View } from './fixtures.js';

// Identifiers that must never reach an annotator's screen during an
// individual round.
const PARTNER_MARKERS = ['user-partner-id', 'Partner Display Name', 'user-third-id'];

describe('anonymity at the glass (individual rounds)', () => {
  let root: HTMLElement;
  let server: FakeServer;

  beforeEach(() => {
    window.localStorage.clear();
    document.body.innerHTML = '<div id="root"></div>';
    root = document.getElementById('root')!;
    server = new FakeServer(figure4View());
    // The server never puts partner identities into annotator payloads;
    // the view carries pseudonym labels only.  Anything else in the DOM
    // would have to come from the UI itself.
    server.view.partners = ['Annotator B', 'Annotator C'];
  });

  it('renders the whole editor screen with pseudonyms only', async () => {
    const app = new App(root, {}, server.client());
    await app.openWorkspace('ws-f4');

    const domText = root.textContent ?? '';
    const domHtml = root.innerHTML;
    for (const marker of PARTNER_MARKERS) {
      expect(domText).not.toContain(marker);
      expect(domHtml).not.toContain(marker);
    }
    expect(domText).toContain('Annotator B');
    expect(domText).toContain('Annotator C');
  });

  it('cue attributions in the overlay render by pseudonym', async () => {
    const app = new App(root, {}, server.client());
    await app.openWorkspace('ws-f4');
    // the Wee1 highlight carries a concept-mismatch cue attributed to a
    // pseudonymous partner through its title/underline, never a user id
    const wee1 = [...root.querySelectorAll<HTMLElement>('span.hl')].find(
      (s) => s.textContent === 'Wee1',
    )!;
    expect(wee1.classList.contains('cue-concept')).toBe(true);
    expect(root.innerHTML).not.toContain('user-partner-id');
  });

  it('partner labels appear in the controls for individual rounds', async () => {
    const app = new App(root, {}, server.client());
    await app.openWorkspace('ws-f4');
    const labels = root.querySelector('.partner-labels');
    expect(labels).not.toBeNull();
    expect(labels!.textContent).toContain('Annotator B');
  });
});
