const { accounts, deploy, run } = require('./harness');

run(async () => {
  const l = await deploy('Ledger');
  const t = await l.call('owner', 'transfer(address,uint256)', [accounts.alice, 10n]);
  const a = await l.call('alice', 'balanceOf(address)', [accounts.alice]);
  const o = await l.call('owner', 'balanceOf(address)', [accounts.owner]);
  const ok = t.ok && a.value === 10n && o.value === 990n;
  if (!ok) console.error('ledger tests failed', { t, a, o });
  return ok;
});
